#include "lyap/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lyap/error.hpp"

namespace lyap {

namespace {

template <class T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw FormatError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("field '") + name + "' has the wrong type");
  }
}

double finite_or_cap(double v) { return std::isfinite(v) ? v : kLossCap; }

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
  return r;
}

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* ext) {
  auto p = base;
  p += ext;
  return p;
}

}  // namespace

json spectrum_to_json(const SpectrumRecord& rec) {
  json j;
  j["variant_id"] = rec.variant_id;
  j["task"] = std::string(task_name(rec.task));
  j["architecture"] = std::string(architecture_name(rec.architecture));
  j["hidden_size"] = rec.hidden_size;
  j["init_param"] = rec.init_param;
  j["training_fraction"] = rec.training_fraction;
  j["target_loss"] = finite_or_cap(rec.target_loss);
  j["degenerate_flag"] = rec.degenerate;
  j["spectrum"] = rec.values;
  return j;
}

SpectrumRecord spectrum_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("record is not a JSON object");
  SpectrumRecord rec;
  rec.variant_id = field<std::string>(j, "variant_id");
  const auto task = parse_task(field<std::string>(j, "task"));
  if (!task) throw FormatError("field 'task' has an unknown value");
  rec.task = *task;
  const auto arch_name = field<std::string>(j, "architecture");
  const auto arch = arch_name == "linear" ? std::optional(Architecture::Linear)
                                          : parse_architecture(arch_name);
  if (!arch) throw FormatError("field 'architecture' has an unknown value");
  rec.architecture = *arch;
  rec.hidden_size = field<std::size_t>(j, "hidden_size");
  rec.init_param = field<double>(j, "init_param");
  rec.training_fraction = field<double>(j, "training_fraction");
  if (!(rec.training_fraction >= 0.0 && rec.training_fraction <= 1.0))
    throw FormatError("field 'training_fraction' outside [0, 1]");
  rec.target_loss = field<double>(j, "target_loss");
  if (!(rec.target_loss >= 0.0)) throw FormatError("field 'target_loss' must be non-negative");
  rec.degenerate = field<bool>(j, "degenerate_flag");
  rec.values = field<std::vector<double>>(j, "spectrum");
  for (std::size_t i = 1; i < rec.values.size(); ++i)
    if (rec.values[i] > rec.values[i - 1])
      throw FormatError("field 'spectrum' is not sorted non-increasing");
  return rec;
}

void write_spectra(const std::filesystem::path& path, std::span<const SpectrumRecord> records,
                   bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& r : records) out << spectrum_to_json(r).dump() << '\n';
}

std::vector<SpectrumRecord> read_spectra(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<SpectrumRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(spectrum_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON (" +
                        e.what() + ")");
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

json cell_spec_to_json(const CellSpec& spec) {
  return json{{"architecture", std::string(architecture_name(spec.architecture))},
              {"hidden_size", spec.hidden_size},
              {"input_size", spec.input_size},
              {"init_param", spec.init_param},
              {"seed", spec.seed},
              {"dt", spec.dt},
              {"asrnn_eps", spec.asrnn_eps},
              {"asrnn_gamma", spec.asrnn_gamma}};
}

CellSpec cell_spec_from_json(const json& j) {
  CellSpec s;
  const auto name = field<std::string>(j, "architecture");
  const auto arch = name == "linear" ? std::optional(Architecture::Linear) : parse_architecture(name);
  if (!arch) throw FormatError("unknown architecture '" + name + "'");
  s.architecture = *arch;
  s.hidden_size = field<std::size_t>(j, "hidden_size");
  s.input_size = field<std::size_t>(j, "input_size");
  s.init_param = field<double>(j, "init_param");
  s.seed = field<std::uint64_t>(j, "seed");
  s.dt = j.value("dt", s.dt);
  s.asrnn_eps = j.value("asrnn_eps", s.asrnn_eps);
  s.asrnn_gamma = j.value("asrnn_gamma", s.asrnn_gamma);
  return s;
}

void save_tensors(const std::filesystem::path& base, const TensorBundle& bundle) {
  std::ofstream bin(with_suffix(base, ".bin"), std::ios::binary | std::ios::trunc);
  if (!bin) throw FormatError("cannot write " + with_suffix(base, ".bin").string());
  json index = json::array();
  std::size_t offset = 0;
  for (const auto& t : bundle.tensors) {
    for (double v : t.value.values()) {
      const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
      bin.write(reinterpret_cast<const char*>(&bits), 8);
    }
    index.push_back(
        {{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"offset", offset}});
    offset += t.value.size() * 8;
  }
  json side{{"format", "lyap-tensors-v1"}, {"tensors", index}, {"meta", bundle.meta}};
  write_text_file(with_suffix(base, ".json"), side.dump(2) + "\n");
}

TensorBundle load_tensors(const std::filesystem::path& base) {
  json side;
  try {
    side = json::parse(read_text_file(with_suffix(base, ".json")));
  } catch (const json::exception& e) {
    throw FormatError(with_suffix(base, ".json").string() + ": " + e.what());
  }
  if (side.value("format", "") != "lyap-tensors-v1")
    throw FormatError(with_suffix(base, ".json").string() + ": unknown checkpoint format");
  const std::string raw = read_text_file(with_suffix(base, ".bin"));
  TensorBundle bundle;
  bundle.meta = side.value("meta", json::object());
  for (const auto& t : side.at("tensors")) {
    const auto rows = field<std::size_t>(t, "rows");
    const auto cols = field<std::size_t>(t, "cols");
    const auto offset = field<std::size_t>(t, "offset");
    if (offset + rows * cols * 8 > raw.size())
      throw FormatError(with_suffix(base, ".bin").string() + ": tensor '" +
                        field<std::string>(t, "name") + "' extends past end of file (" +
                        std::to_string(raw.size()) + " bytes)");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, raw.data() + offset + 8 * i, 8);
      m.values()[i] = std::bit_cast<double>(to_le(bits));
    }
    bundle.tensors.push_back({field<std::string>(t, "name"), std::move(m)});
  }
  return bundle;
}

void save_cell(const std::filesystem::path& base, const Cell& cell, json meta) {
  meta["cell_spec"] = cell_spec_to_json(cell.spec());
  save_tensors(base, {cell.params(), meta});
}

Cell load_cell(const std::filesystem::path& base) {
  auto bundle = load_tensors(base);
  if (!bundle.meta.contains("cell_spec"))
    throw FormatError(base.string() + ": checkpoint has no cell_spec");
  const CellSpec spec = cell_spec_from_json(bundle.meta["cell_spec"]);
  const std::size_t n = param_layout(spec).size();
  if (bundle.tensors.size() < n) throw FormatError(base.string() + ": missing cell tensors");
  bundle.tensors.resize(n);
  try {
    return Cell(spec, std::move(bundle.tensors));
  } catch (const ContractError& e) {
    throw FormatError(base.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace lyap
