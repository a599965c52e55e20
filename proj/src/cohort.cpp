#include "lyap/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>

#include "lyap/error.hpp"

namespace lyap {

namespace fs = std::filesystem;

namespace {

template <class T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name))
    throw FormatError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("field '") + name + "' has the wrong type");
  }
}

void for_each_line(const fs::path& path, const std::function<void(const json&)>& fn) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON (" +
                        e.what() + ")");
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void append_lines(const fs::path& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw FormatError("write to " + path.string() + " failed");
}

void truncate(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
}

std::string fraction_name(double f) { return "f" + format_double(f); }

}  // namespace

json variant_to_json(const VariantSpec& v) {
  return json{{"variant_id", v.variant_id},
              {"task", std::string(task_name(v.task))},
              {"replicate", v.replicate},
              {"cell", cell_spec_to_json(v.cell)}};
}

VariantSpec variant_from_json(const json& j) {
  VariantSpec v;
  v.variant_id = field<std::string>(j, "variant_id");
  const auto task = parse_task(field<std::string>(j, "task"));
  if (!task) throw FormatError("field 'task' has an unknown value");
  v.task = *task;
  v.replicate = field<std::size_t>(j, "replicate");
  v.cell = cell_spec_from_json(field<json>(j, "cell"));
  return v;
}

json loss_curve_to_json(const LossCurve& c) {
  json curve = json::array();
  for (const auto& [f, l] : c.by_fraction) curve.push_back({f, std::isfinite(l) ? l : kLossCap});
  return json{{"variant_id", c.variant_id},
              {"target_loss", std::isfinite(c.target_loss) ? c.target_loss : kLossCap},
              {"failed", c.failed},
              {"curve", curve}};
}

LossCurve loss_curve_from_json(const json& j) {
  LossCurve c;
  c.variant_id = field<std::string>(j, "variant_id");
  c.target_loss = field<double>(j, "target_loss");
  c.failed = field<bool>(j, "failed");
  for (const auto& p : field<json>(j, "curve")) {
    if (!p.is_array() || p.size() != 2) throw FormatError("field 'curve' holds a malformed pair");
    c.by_fraction[p[0].get<double>()] = p[1].get<double>();
  }
  return c;
}

CohortStore::CohortStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  rebuild();
}

void CohortStore::rebuild() {
  entries_.clear();
  by_id_.clear();
  spectrum_order_.clear();
  for_each_line(variants_path(), [&](const json& j) {
    auto v = variant_from_json(j);
    if (by_id_.contains(v.variant_id))
      throw FormatError("duplicate variant_id '" + v.variant_id + "'");
    by_id_[v.variant_id] = entries_.size();
    entries_.push_back({std::move(v), {}, {}, {}});
  });
  for_each_line(losses_path(), [&](const json& j) {
    auto c = loss_curve_from_json(j);
    auto& e = mutable_entry(c.variant_id);
    if (e.losses) throw FormatError("second loss record for '" + c.variant_id + "'");
    e.losses = std::move(c);
  });
  for_each_line(spectra_path(), [&](const json& j) {
    auto r = spectrum_from_json(j);
    const std::size_t idx = by_id_.contains(r.variant_id) ? by_id_.at(r.variant_id) : entries_.size();
    auto& e = mutable_entry(r.variant_id);
    spectrum_order_.emplace_back(idx, e.spectra.size());
    e.spectra.push_back(std::move(r));
  });
  const fs::path ckpt = root_ / "checkpoints";
  for (auto& e : entries_) {
    const fs::path dir = ckpt / e.spec.variant_id;
    if (!fs::is_directory(dir)) continue;
    for (const auto& f : fs::directory_iterator(dir)) {
      const std::string name = f.path().filename().string();
      if (name.size() < 7 || name.front() != 'f' || !name.ends_with(".json")) continue;
      const std::string stem = name.substr(1, name.size() - 6);
      double fraction = 0.0;
      try {
        std::size_t used = 0;
        fraction = std::stod(stem, &used);
        if (used != stem.size()) continue;
      } catch (const std::exception&) {
        continue;
      }
      e.checkpoints[fraction] = dir / ("f" + stem);
    }
  }
}

CohortEntry& CohortStore::mutable_entry(const std::string& variant_id) {
  auto it = by_id_.find(variant_id);
  if (it == by_id_.end())
    throw FormatError("record references unknown variant '" + variant_id + "'");
  return entries_[it->second];
}

const CohortEntry& CohortStore::entry(const std::string& variant_id) const {
  auto it = by_id_.find(variant_id);
  if (it == by_id_.end()) throw ContractError("unknown variant '" + variant_id + "'");
  return entries_[it->second];
}

void CohortStore::add_variants(std::span<const VariantSpec> variants) {
  std::vector<json> rows;
  std::set<std::string> seen;
  for (const auto& v : variants) {
    require(!by_id_.contains(v.variant_id) && seen.insert(v.variant_id).second,
            "variant_id '" + v.variant_id + "' already in the cohort");
    rows.push_back(variant_to_json(v));
  }
  append_lines(variants_path(), rows);
  for (const auto& v : variants) {
    by_id_[v.variant_id] = entries_.size();
    entries_.push_back({v, {}, {}, {}});
  }
}

void CohortStore::add_losses(std::span<const LossCurve> curves) {
  std::vector<json> rows;
  std::set<std::string> seen;
  for (const auto& c : curves) {
    require(contains(c.variant_id), "loss record references unknown variant '" + c.variant_id + "'");
    require(!entry(c.variant_id).losses && seen.insert(c.variant_id).second,
            "variant '" + c.variant_id + "' already has a loss record");
    rows.push_back(loss_curve_to_json(c));
  }
  append_lines(losses_path(), rows);
  // Stored values are what a re-read would see.
  for (const auto& r : rows) {
    auto c = loss_curve_from_json(r);
    mutable_entry(c.variant_id).losses = std::move(c);
  }
}

void CohortStore::add_spectra(std::span<const SpectrumRecord> records) {
  std::vector<json> rows;
  for (const auto& r : records) {
    require(contains(r.variant_id), "spectrum references unknown variant '" + r.variant_id + "'");
    rows.push_back(spectrum_to_json(r));
  }
  append_lines(spectra_path(), rows);
  for (const auto& r : rows) {
    auto rec = spectrum_from_json(r);
    const std::size_t idx = by_id_.at(rec.variant_id);
    spectrum_order_.emplace_back(idx, entries_[idx].spectra.size());
    entries_[idx].spectra.push_back(std::move(rec));
  }
}

fs::path CohortStore::checkpoint_base(const std::string& variant_id, double fraction) const {
  require(contains(variant_id), "checkpoint for unknown variant '" + variant_id + "'");
  require(fraction >= 0.0 && fraction <= 1.0, "checkpoint fraction must lie in [0, 1]");
  return root_ / "checkpoints" / variant_id / fraction_name(fraction);
}

void CohortStore::register_checkpoint(const std::string& variant_id, double fraction) {
  const fs::path base = checkpoint_base(variant_id, fraction);
  fs::path sidecar = base;
  sidecar += ".json";
  require(fs::exists(sidecar), "checkpoint " + base.string() + " was not written");
  mutable_entry(variant_id).checkpoints[fraction] = base;
}

std::vector<SpectrumRecord> CohortStore::spectra() const {
  std::vector<SpectrumRecord> out;
  out.reserve(spectrum_order_.size());
  for (auto [e, i] : spectrum_order_) out.push_back(entries_[e].spectra[i]);
  return out;
}

void CohortStore::clear_variants() {
  clear_spectra();
  clear_losses();
  truncate(variants_path());
  entries_.clear();
  by_id_.clear();
}

void CohortStore::clear_losses() {
  truncate(losses_path());
  fs::remove_all(root_ / "checkpoints");
  for (auto& e : entries_) {
    e.losses.reset();
    e.checkpoints.clear();
  }
}

void CohortStore::clear_spectra() {
  truncate(spectra_path());
  spectrum_order_.clear();
  for (auto& e : entries_) e.spectra.clear();
}

}  // namespace lyap
