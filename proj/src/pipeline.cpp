#include "lyap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include "lyap/datasets.hpp"
#include "lyap/error.hpp"
#include "lyap/parallel.hpp"
#include "lyap/rng.hpp"
#include "lyap/signals.hpp"

#ifndef LYAP_VERSION
#define LYAP_VERSION "0.0.0"
#endif
#ifndef LYAP_SOURCE_DIR
#define LYAP_SOURCE_DIR "."
#endif

namespace lyap {

namespace fs = std::filesystem;

namespace {

// Config object reader that rejects keys it was never asked about.
class Section {
 public:
  Section(json j, std::string where) : j_(std::move(j)), where_(std::move(where)) {
    if (j_.is_null()) j_ = json::object();
    require(j_.is_object(), where_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_[key].is_null()) return;
    try {
      out = j_[key].get<T>();
    } catch (const json::exception&) {
      throw ContractError(where_ + "." + key + " has the wrong type");
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_[key].is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_[key].is_null() ? &j_[key] : nullptr;
  }

  Section sub(const char* key) {
    seen_.insert(key);
    return Section(j_.contains(key) ? j_[key] : json::object(), where_ + "." + key);
  }

  void done() const {
    for (const auto& [k, v] : j_.items())
      require(seen_.contains(k), "unknown config key '" + where_ + "." + k + "'");
  }

 private:
  json j_;
  std::string where_;
  std::set<std::string> seen_;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::mutex log_mu;

struct TaskData {
  ClassificationSet train, validation;
};

fs::path dataset_path(const DatasetConfig& d) {
  fs::path p(d.path);
  return p.is_absolute() ? p : data_root() / p;
}

TaskData load_task_data(const ExperimentConfig& c) {
  require(!c.dataset.path.empty(), "dataset.path is required for task " + std::string(task_name(c.task)));
  const fs::path p = dataset_path(c.dataset);
  if (!fs::exists(p)) throw ContractError("dataset not found: " + p.string());
  std::size_t n = 0;
  RowImageDataset images;
  CharDataset chars;
  if (c.task == Task::SMNIST) {
    images = load_mnist_idx(p / "images-idx3-ubyte", p / "labels-idx1-ubyte", c.dataset.downsample2);
    n = images.size();
  } else {
    chars = load_text_corpus(p, c.dataset.seq_len);
    n = chars.size();
  }
  const std::size_t val = c.dataset.validation_examples;
  require(val >= 1 && val < n, "dataset has " + std::to_string(n) + " examples; cannot hold out " +
                                   std::to_string(val) + " for validation");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(c.seed, fnv1a("dataset")));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t train_n =
      c.dataset.train_examples == 0 ? n - val : std::min(c.dataset.train_examples, n - val);
  const std::span<const std::size_t> v(order.data(), val), t(order.data() + val, train_n);
  if (c.task == Task::SMNIST) return {images_subset(images, t), images_subset(images, v)};
  return {char_subset(chars, t), char_subset(chars, v)};
}

std::vector<InputSequence> le_inputs(const ExperimentConfig& c, const TaskData* data) {
  const std::size_t rows = c.le.warmup + c.le.seq_len;
  Rng rng(derive_seed(c.seed, fnv1a("le-inputs")));
  std::vector<InputSequence> out;
  for (std::size_t s = 0; s < c.le.n_inputs; ++s) {
    if (c.task == Task::TargetLearning) {
      std::normal_distribution<double> noise(0.0, c.le_input_scale);
      Matrix m(rows, 1);
      for (double& v : m.values()) v = noise(rng);
      out.push_back(std::move(m));
      continue;
    }
    // Validation examples played back to back.
    const auto& set = data->validation;
    std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
    Matrix m(rows, set.input_size);
    std::size_t r = 0;
    while (r < rows) {
      const Matrix ex = set.inputs(pick(rng));
      for (std::size_t i = 0; i < ex.rows() && r < rows; ++i, ++r)
        for (std::size_t j = 0; j < ex.cols(); ++j) m(r, j) = ex(i, j);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::string csv_double(double v) { return format_double(v); }

std::string reference_footer(Task t) {
  switch (t) {
    case Task::TargetLearning:
      return "full-scale reference F1 (target learning, 1200 variants): AeLLE 0.724, LE mean 0.705, "
             "LE max 0.504, LE PC 0.703";
    case Task::CharPrediction:
      return "full-scale reference F1 (character prediction, 1200 variants): AeLLE 0.877, LE mean 0.834, "
             "LE max 0.859, LE PC 0.860";
    case Task::SMNIST:
      return "full-scale reference F1 (sequential MNIST, 1600 variants): AeLLE 0.859, LE mean 0.609, "
             "LE max 0.566, LE PC 0.608";
    case Task::Synthetic: break;
  }
  return {};
}

}  // namespace

void ExperimentConfig::validate() const {
  require(split.size() == 2 || split.size() == 3, "split must have 2 or 3 fractions");
  double sum = 0.0;
  for (double f : split) {
    require(f > 0.0, "split fractions must be positive");
    sum += f;
  }
  require(std::abs(sum - 1.0) < 1e-9, "split fractions must sum to 1");
  require(!checkpoint_fractions.empty(), "checkpoint_fractions must not be empty");
  for (double f : checkpoint_fractions)
    require(f >= 0.0 && f <= 1.0, "checkpoint fractions must lie in [0, 1]");
  require(le.seq_len >= 1 && le.n_inputs >= 1, "le.seq_len and le.n_inputs must be >= 1");
  require(le_input_scale >= 0.0, "le.input_scale must be >= 0");
  for (auto d : subspace_dims)
    require(d == 1 || d == 2 || d == 4 || d == 10, "subspace dims must be 1, 2, 4 or 10");
  if (fit_fraction)
    require(std::find(checkpoint_fractions.begin(), checkpoint_fractions.end(), *fit_fraction) !=
                checkpoint_fractions.end(),
            "fit_fraction must be one of checkpoint_fractions");
  autoencoder.validate();
  training.validate();
  require(!grid.architectures.empty() && !grid.hidden_sizes.empty() && !grid.init_params.empty() &&
              grid.replicates_per_point >= 1,
          "variant grid is empty");
  for (auto a : grid.architectures) {
    if (task == Task::TargetLearning)
      require(a == Architecture::Rank1RNN, "target-learning variants must be rank1");
    else
      require(a == Architecture::VanillaRNN || a == Architecture::LSTM || a == Architecture::GRU,
              "supervised tasks train rnn, lstm or gru variants");
  }
  require(task != Task::Synthetic, "the pipeline runs target-learning, char-rnn or smnist");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Section top(j, "config");
  top.get("name", c.name);
  std::string task = std::string(task_name(c.task));
  top.get("task", task);
  const auto t = parse_task(task);
  require(t.has_value(), "unknown task '" + task + "'");
  c.task = *t;
  top.get("seed", c.seed);
  top.get("long_running", c.long_running);

  {
    Section g = top.sub("grid");
    std::vector<std::string> archs;
    g.get("architectures", archs);
    for (const auto& a : archs) {
      const auto arch = parse_architecture(a);
      require(arch.has_value(), "unknown architecture '" + a + "'");
      c.grid.architectures.push_back(*arch);
    }
    g.get("hidden_sizes", c.grid.hidden_sizes);
    if (const json* p = g.raw("init_params")) {
      if (p->is_array()) {
        c.grid.init_params = p->get<std::vector<double>>();
      } else {
        Section r(*p, "config.grid.init_params");
        double lo = 0.0, hi = 0.0;
        std::size_t count = 0;
        r.get("from", lo);
        r.get("to", hi);
        r.get("count", count);
        r.done();
        c.grid.init_params = linspace(lo, hi, count);
      }
    }
    g.get("replicates", c.grid.replicates_per_point);
    g.done();
  }
  {
    Section f = top.sub("force");
    f.get("dt", c.force.dt);
    f.get("rls_delta", c.force.rls_delta);
    f.get("train_steps", c.force.train_steps);
    f.get("test_steps", c.force.test_steps);
    f.get("update_stride", c.force.update_stride);
    f.get("initial_state_scale", c.force.initial_state_scale);
    f.done();
  }
  {
    Section s = top.sub("training");
    s.get("epochs", c.training.epochs);
    s.get("learning_rate", c.training.learning_rate);
    s.get("batch_size", c.training.batch_size);
    std::string opt = c.training.optimizer == Optimizer::Adam ? "adam" : "sgd";
    s.get("optimizer", opt);
    require(opt == "adam" || opt == "sgd", "training.optimizer must be adam or sgd");
    c.training.optimizer = opt == "adam" ? Optimizer::Adam : Optimizer::SGD;
    s.get("gradient_clip", c.training.gradient_clip);
    s.done();
  }
  {
    Section d = top.sub("dataset");
    d.get("path", c.dataset.path);
    d.get("downsample2", c.dataset.downsample2);
    d.get("seq_len", c.dataset.seq_len);
    d.get("train_examples", c.dataset.train_examples);
    d.get("validation_examples", c.dataset.validation_examples);
    d.done();
  }
  top.get("checkpoint_fractions", c.checkpoint_fractions);
  {
    Section l = top.sub("le");
    l.get("seq_len", c.le.seq_len);
    l.get("n_inputs", c.le.n_inputs);
    l.get("warmup", c.le.warmup);
    l.get("k_exponents", c.le.k_exponents);
    l.get("input_scale", c.le_input_scale);
    l.done();
  }
  {
    Section a = top.sub("autoencoder");
    a.get("layer_sizes", c.autoencoder.layer_sizes);
    std::string norm = c.autoencoder.l_norm == LossNorm::L1 ? "l1" : "l2";
    a.get("l_norm", norm);
    require(norm == "l1" || norm == "l2", "autoencoder.l_norm must be l1 or l2");
    c.autoencoder.l_norm = norm == "l1" ? LossNorm::L1 : LossNorm::L2;
    a.get("alpha_max", c.autoencoder.alpha_max);
    a.get("alpha_ramp_start_epoch", c.autoencoder.alpha_ramp_start_epoch);
    a.get("alpha_ramp_fallback_epoch", c.autoencoder.alpha_ramp_fallback_epoch);
    a.get("alpha_ramp_epochs", c.autoencoder.alpha_ramp_epochs);
    a.get("epochs", c.autoencoder.epochs);
    a.get("learning_rate", c.autoencoder.learning_rate);
    a.get("batch_size", c.autoencoder.batch_size);
    a.done();
  }
  top.get("split", c.split);
  {
    Section k = top.sub("classify");
    k.get("label_threshold", c.label_threshold);
    k.get("fixed_tau", c.fixed_tau);
    k.get("subspace_dims", c.subspace_dims);
    k.get("fit_fraction", c.fit_fraction);
    k.done();
  }
  top.done();
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json archs = json::array();
  for (auto a : c.grid.architectures) archs.push_back(std::string(architecture_name(a)));
  json j;
  j["name"] = c.name;
  j["task"] = std::string(task_name(c.task));
  j["seed"] = c.seed;
  j["long_running"] = c.long_running;
  j["grid"] = {{"architectures", archs},
               {"hidden_sizes", c.grid.hidden_sizes},
               {"init_params", c.grid.init_params},
               {"replicates", c.grid.replicates_per_point}};
  j["force"] = {{"dt", c.force.dt},
                {"rls_delta", c.force.rls_delta},
                {"train_steps", c.force.train_steps},
                {"test_steps", c.force.test_steps},
                {"update_stride", c.force.update_stride},
                {"initial_state_scale", c.force.initial_state_scale}};
  j["training"] = {{"epochs", c.training.epochs},
                   {"learning_rate", c.training.learning_rate},
                   {"batch_size", c.training.batch_size},
                   {"optimizer", c.training.optimizer == Optimizer::Adam ? "adam" : "sgd"},
                   {"gradient_clip", c.training.gradient_clip}};
  j["dataset"] = {{"path", c.dataset.path},
                  {"downsample2", c.dataset.downsample2},
                  {"seq_len", c.dataset.seq_len},
                  {"train_examples", c.dataset.train_examples},
                  {"validation_examples", c.dataset.validation_examples}};
  j["checkpoint_fractions"] = c.checkpoint_fractions;
  j["le"] = {{"seq_len", c.le.seq_len},
             {"n_inputs", c.le.n_inputs},
             {"warmup", c.le.warmup},
             {"k_exponents", c.le.k_exponents},
             {"input_scale", c.le_input_scale}};
  const auto& a = c.autoencoder;
  j["autoencoder"] = {
      {"layer_sizes", a.layer_sizes},
      {"l_norm", a.l_norm == LossNorm::L1 ? "l1" : "l2"},
      {"alpha_max", a.alpha_max},
      {"alpha_ramp_start_epoch",
       a.alpha_ramp_start_epoch ? json(*a.alpha_ramp_start_epoch) : json(nullptr)},
      {"alpha_ramp_fallback_epoch", a.alpha_ramp_fallback_epoch},
      {"alpha_ramp_epochs", a.alpha_ramp_epochs},
      {"epochs", a.epochs},
      {"learning_rate", a.learning_rate},
      {"batch_size", a.batch_size}};
  j["split"] = c.split;
  j["classify"] = {{"label_threshold", optional_json(c.label_threshold)},
                   {"fixed_tau", optional_json(c.fixed_tau)},
                   {"subspace_dims", c.subspace_dims},
                   {"fit_fraction", optional_json(c.fit_fraction)}};
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ContractError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
  try {
    return config_from_json(j);
  } catch (const ContractError& e) {
    throw ContractError(path.string() + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& c) {
  return hex16(fnv1a(config_to_json(c).dump()));
}

fs::path preset_path(std::string_view name) {
  const char* env = std::getenv("LYAP_CONFIG_DIR");
  const fs::path dir = env ? fs::path(env) : fs::path(LYAP_SOURCE_DIR) / "configs";
  const fs::path p = dir / (std::string(name) + ".json");
  if (!fs::exists(p)) throw ContractError("no preset named '" + std::string(name) + "' in " + dir.string());
  return p;
}

fs::path data_root() {
  const char* env = std::getenv("LYAP_DATA_DIR");
  return env ? fs::path(env) : fs::path(LYAP_SOURCE_DIR) / "data";
}

std::string_view tool_version() { return LYAP_VERSION; }

Pipeline::Pipeline(ExperimentConfig config, RunOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  config_.validate();
  if (options_.threads == 0) options_.threads = 1;
  config_.grid.task = config_.task;
  config_.grid.master_seed = config_.seed;
}

void Pipeline::note(const std::string& line) const {
  if (!options_.log) return;
  std::lock_guard lock(log_mu);
  *options_.log << line << '\n';
  options_.log->flush();
}

void Pipeline::need(const fs::path& p, std::string_view producer) const {
  if (!fs::exists(p))
    throw ContractError("missing " + p.string() + "; run `lyapctl " + std::string(producer) +
                        "` on this output directory first");
}

void Pipeline::begin(std::string_view stage, bool fresh) {
  fs::create_directories(options_.output);
  if (fresh || !fs::exists(manifest_path())) return;
  const json m = json::parse(read_text_file(manifest_path()));
  const std::string have = m.value("config_hash", "");
  if (have != config_hash(config_))
    throw ContractError("output directory " + options_.output.string() + " holds results of config " +
                        have + ", not " + config_hash(config_) + "; re-run gen-variants or choose another --output before " +
                        std::string(stage));
}

void Pipeline::finish(std::string_view stage) {
  std::set<std::string> done;
  if (stage != "gen-variants" && fs::exists(manifest_path())) {
    const json m = json::parse(read_text_file(manifest_path()));
    for (const auto& s : m.value("stages", json::array())) done.insert(s.get<std::string>());
  }
  done.insert(std::string(stage));
  json stages = json::array();
  for (auto s : kStageNames)
    if (done.contains(std::string(s))) stages.push_back(std::string(s));
  json m;
  m["tool"] = "lyapctl";
  m["version"] = std::string(tool_version());
  m["config_hash"] = config_hash(config_);
  m["config"] = config_to_json(config_);
  m["stages"] = stages;
  write_text_file(manifest_path(), m.dump(2) + "\n");
}

void Pipeline::gen_variants() {
  begin("gen-variants", true);
  VariantGrid grid = config_.grid;
  if (config_.task == Task::TargetLearning) {
    grid.input_size = 1;
  } else {
    const TaskData data = load_task_data(config_);
    grid.input_size = data.train.input_size;
  }
  const auto variants = generate_variants(grid);
  CohortStore store(cohort_dir());
  store.clear_variants();
  store.add_variants(variants);
  note("gen-variants: " + std::to_string(variants.size()) + " variants");
  finish("gen-variants");
}

void Pipeline::train_variants() {
  begin("train-variants");
  need(cohort_dir() / "variants.jsonl", "gen-variants");
  CohortStore store(cohort_dir());
  require(store.size() > 0, "cohort has no variants; run `lyapctl gen-variants` first");
  store.clear_losses();

  const auto& entries = store.entries();
  std::vector<LossCurve> curves(entries.size());
  std::vector<std::vector<double>> saved(entries.size());
  std::optional<TaskData> data;
  if (config_.task != Task::TargetLearning) data = load_task_data(config_);
  const Vector target = gen_four_sine(config_.force.train_steps + config_.force.test_steps);
  std::size_t done = 0;

  parallel_for(entries.size(), options_.threads, [&](std::size_t i) {
    const VariantSpec& v = entries[i].spec;
    LossCurve curve{v.variant_id, 0.0, false, {}};
    if (config_.task == Task::TargetLearning) {
      ForceConfig fc = config_.force;
      fc.N = v.cell.hidden_size;
      fc.g = v.cell.init_param;
      fc.checkpoint_fractions = config_.checkpoint_fractions;
      CellSpec spec = v.cell;
      spec.dt = fc.dt;
      const ForceResult r = force_train(init_cell(spec), fc, target, derive_seed(v.cell.seed, 1));
      curve.target_loss = r.test_error;
      curve.failed = r.failed;
      curve.by_fraction[1.0] = r.test_error;
      for (const auto& ck : r.checkpoints) {
        const fs::path base = store.checkpoint_base(v.variant_id, ck.fraction);
        fs::create_directories(base.parent_path());
        save_cell(base, ck.cell, json{{"variant_id", v.variant_id}, {"fraction", ck.fraction}});
        saved[i].push_back(ck.fraction);
      }
    } else {
      SupervisedTrainConfig tc = config_.training;
      tc.checkpoint_fractions = config_.checkpoint_fractions;
      tc.seed = derive_seed(v.cell.seed, 2);
      const SequenceModel init = init_sequence_model(v.cell, data->train.num_classes);
      const SupervisedResult r = bptt_train(init, data->train, data->validation, tc);
      curve.failed = r.failed;
      curve.target_loss = r.failed ? kLossCap : r.best_validation_loss;
      for (const auto& ck : r.checkpoints) {
        curve.by_fraction[ck.fraction] = ck.validation_loss;
        const fs::path base = store.checkpoint_base(v.variant_id, ck.fraction);
        fs::create_directories(base.parent_path());
        save_model(base, ck.model, json{{"variant_id", v.variant_id}, {"fraction", ck.fraction}});
        saved[i].push_back(ck.fraction);
      }
    }
    curves[i] = std::move(curve);
    std::lock_guard lock(log_mu);
    ++done;
    if (options_.log)
      *options_.log << "  [" << done << "/" << entries.size() << "] " << v.variant_id
                    << " loss " << format_double(curves[i].target_loss)
                    << (curves[i].failed ? " (failed)" : "") << std::endl;
  });

  for (std::size_t i = 0; i < entries.size(); ++i)
    for (double f : saved[i]) store.register_checkpoint(entries[i].spec.variant_id, f);
  store.add_losses(curves);
  std::size_t failed = 0;
  for (const auto& c : curves) failed += c.failed;
  note("train-variants: " + std::to_string(curves.size()) + " variants trained, " +
       std::to_string(failed) + " failed");
  finish("train-variants");
}

void Pipeline::compute_le() {
  begin("compute-le");
  need(cohort_dir() / "losses.jsonl", "train-variants");
  CohortStore store(cohort_dir());
  store.clear_spectra();

  struct Job {
    std::size_t entry;
    double fraction;
    fs::path base;
  };
  std::vector<Job> jobs;
  const auto& entries = store.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!e.losses)
      throw ContractError("variant " + e.spec.variant_id + " has no loss record; run `lyapctl train-variants` first");
    for (double f : config_.checkpoint_fractions) {
      auto it = e.checkpoints.find(f);
      if (it == e.checkpoints.end())
        throw ContractError("variant " + e.spec.variant_id + " has no checkpoint at fraction " +
                            format_double(f) + "; run `lyapctl train-variants` first");
      jobs.push_back({i, f, it->second});
    }
  }

  std::optional<TaskData> data;
  if (config_.task != Task::TargetLearning) data = load_task_data(config_);
  const auto inputs = le_inputs(config_, data ? &*data : nullptr);

  std::vector<std::optional<SpectrumRecord>> out(jobs.size());
  std::vector<std::string> skipped(jobs.size());
  parallel_for(jobs.size(), options_.threads, [&](std::size_t j) {
    const auto& job = jobs[j];
    const auto& e = entries[job.entry];
    const Cell cell = config_.task == Task::TargetLearning ? load_cell(job.base) : load_model(job.base).cell;
    try {
      SpectrumRecord r = lyap::compute_le(cell, inputs, config_.le, {1, e.spec.variant_id});
      r.variant_id = e.spec.variant_id;
      r.task = config_.task;
      r.training_fraction = job.fraction;
      r.target_loss = e.losses->target_loss;
      out[j] = std::move(r);
    } catch (const NumericError& err) {
      skipped[j] = err.what();
    }
  });

  std::size_t len = 0;
  for (const auto& r : out)
    if (r) len = std::max(len, r->values.size());
  std::vector<SpectrumRecord> records;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!out[j]) {
      note("compute-le: skipped " + entries[jobs[j].entry].spec.variant_id + " at fraction " +
           format_double(jobs[j].fraction) + ": " + skipped[j]);
      continue;
    }
    SpectrumRecord r = std::move(*out[j]);
    if (r.values.size() != len) r.values = interpolate_spectrum(r.values, len);
    records.push_back(std::move(r));
  }
  require(!records.empty(), "no spectrum could be computed");
  store.add_spectra(records);
  note("compute-le: " + std::to_string(records.size()) + " spectra of length " + std::to_string(len));
  finish("compute-le");
}

double Pipeline::label_threshold() const {
  if (config_.label_threshold) return *config_.label_threshold;
  CohortStore store(cohort_dir());
  std::vector<double> losses;
  for (const auto& e : store.entries())
    if (e.losses) losses.push_back(e.losses->target_loss);
  require(!losses.empty(), "no loss records; run `lyapctl train-variants` first");
  return median(losses);
}

CohortSplit Pipeline::split() const {
  need(split_path(), "train-ae");
  const json j = json::parse(read_text_file(split_path()));
  CohortSplit s;
  s.train_ids = j.at("train").get<std::vector<std::string>>();
  for (const auto& id : j.at("validation")) s.train_ids.push_back(id.get<std::string>());
  s.test_ids = j.at("test").get<std::vector<std::string>>();
  return s;
}

std::vector<SpectrumRecord> Pipeline::cohort_spectra() const {
  need(cohort_dir() / "spectra.jsonl", "compute-le");
  CohortStore store(cohort_dir());
  auto records = store.spectra();
  require(!records.empty(), "cohort has no spectra; run `lyapctl compute-le` first");
  return records;
}

void Pipeline::train_ae() {
  begin("train-ae");
  const auto records = cohort_spectra();

  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& r : records)
    if (seen.insert(r.variant_id).second) ids.push_back(r.variant_id);
  Rng rng(derive_seed(config_.seed, fnv1a("split")));
  std::shuffle(ids.begin(), ids.end(), rng);
  const double n = static_cast<double>(ids.size());
  const std::size_t n_train = static_cast<std::size_t>(std::lround(config_.split[0] * n));
  const std::size_t n_val =
      config_.split.size() == 3 ? static_cast<std::size_t>(std::lround(config_.split[1] * n)) : 0;
  require(n_train >= 1 && n_train + n_val < ids.size(), "cohort too small to split");
  auto sorted = [&](std::size_t from, std::size_t to) {
    std::vector<std::string> v(ids.begin() + static_cast<std::ptrdiff_t>(from),
                               ids.begin() + static_cast<std::ptrdiff_t>(to));
    std::sort(v.begin(), v.end());
    return v;
  };
  const json split{{"train", sorted(0, n_train)},
                   {"validation", sorted(n_train, n_train + n_val)},
                   {"test", sorted(n_train + n_val, ids.size())}};
  write_text_file(split_path(), split.dump(2) + "\n");

  const std::set<std::string> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<SpectrumRecord> fit;
  for (const auto& r : records)
    if (train_ids.contains(r.variant_id) &&
        (!config_.fit_fraction || r.training_fraction == *config_.fit_fraction))
      fit.push_back(r);

  AeConfig ac = config_.autoencoder;
  ac.seed = derive_seed(config_.seed, fnv1a("autoencoder"));
  const AeTrainResult res = ae_train(fit, ac);
  fs::create_directories(ae_base().parent_path());
  save_ae_model(ae_base(), res.model, json{{"ramp_start_epoch", res.ramp_start_epoch}});
  std::ostringstream hist;
  hist << "epoch,loss,reconstruction,alpha\n";
  AeConfig ramp = ac;
  ramp.alpha_ramp_start_epoch = res.ramp_start_epoch;
  for (std::size_t e = 0; e < res.loss_history.size(); ++e)
    hist << e << ',' << csv_double(res.loss_history[e]) << ','
         << csv_double(res.reconstruction_history[e]) << ',' << csv_double(alpha_at(ramp, e)) << '\n';
  write_text_file(options_.output / "ae" / "history.csv", hist.str());
  note("train-ae: " + std::to_string(fit.size()) + " training spectra, final objective " +
       format_double(res.loss_history.back()) + ", ramp from epoch " +
       std::to_string(res.ramp_start_epoch));
  finish("train-ae");
}

void Pipeline::embed() {
  begin("embed");
  need(fs::path(ae_base()) += ".json", "train-ae");
  const auto records = cohort_spectra();
  const AeModel ae = load_ae_model(ae_base());
  const CohortSplit s = split();
  const std::set<std::string> fit_ids(s.train_ids.begin(), s.train_ids.end());

  std::vector<Vector> latents(records.size());
  parallel_for(records.size(), options_.threads,
               [&](std::size_t i) { latents[i] = ae_encode(ae, records[i].values); });
  std::vector<Vector> fit;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (fit_ids.contains(records[i].variant_id) &&
        (!config_.fit_fraction || records[i].training_fraction == *config_.fit_fraction))
      fit.push_back(latents[i]);
  const Embedding emb = pca_fit(fit);
  write_text_file(embedding_path(), embedding_to_json(emb).dump(2) + "\n");

  const std::size_t k = std::min<std::size_t>(10, emb.axes.rows());
  std::ostringstream out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const json row{{"variant_id", records[i].variant_id},
                   {"training_fraction", records[i].training_fraction},
                   {"target_loss", records[i].target_loss},
                   {"pcs", pca_project(emb, latents[i], k)}};
    out << row.dump() << '\n';
  }
  write_text_file(embedded_path(), out.str());
  std::string ratios;
  for (std::size_t j = 0; j < std::min<std::size_t>(3, emb.explained_ratio.size()); ++j)
    ratios += (j ? " " : "") + format_double(std::round(emb.explained_ratio[j] * 1e4) / 1e4);
  note("embed: " + std::to_string(records.size()) + " records, explained variance " + ratios);
  finish("embed");
}

SuiteOptions Pipeline::suite_options() const {
  SuiteOptions o;
  o.label_threshold = label_threshold();
  o.fit_fraction = config_.fit_fraction;
  o.pooled = !config_.fit_fraction;
  o.subspace_dims = config_.subspace_dims;
  o.fixed_tau = config_.fixed_tau;
  o.threads = options_.threads;
  CohortStore store(cohort_dir());
  for (const auto& e : store.entries())
    if (e.losses) o.loss_at_fraction[e.spec.variant_id] = e.losses->by_fraction;
  return o;
}

SuiteResult Pipeline::classify(const ClassifierSpec& spec) {
  begin("classify");
  spec.validate();
  need(embedding_path(), "embed");
  const auto records = cohort_spectra();
  const AeModel ae = load_ae_model(ae_base());
  const Embedding emb = embedding_from_json(json::parse(read_text_file(embedding_path())));
  SuiteOptions o = suite_options();

  std::pair<std::string, std::string> row;
  switch (spec.kind) {
    case ClassifierKind::PC1Median: row = {"aelle-pca", "pc1-median"}; break;
    case ClassifierKind::PC1FixedThreshold:
      row = {"aelle-pca", "pc1-fixed"};
      o.fixed_tau = spec.tau;
      break;
    case ClassifierKind::MultiPCSubspace:
      row = {"aelle-pca", "subspace-d" + std::to_string(spec.dims)};
      o.subspace_dims = {spec.dims};
      break;
    case ClassifierKind::LinearRegression: row = {"aelle-pca", "lin-reg"}; break;
    case ClassifierKind::LEMeanMedian: row = {"le-stats", "mean-median"}; break;
    case ClassifierKind::LEMaxMedian: row = {"le-stats", "max-median"}; break;
    case ClassifierKind::LEPCAMedian: row = {"le-pca", "pc1-median"}; break;
    case ClassifierKind::LossAtEpochThreshold: row = {"loss-at-epoch", "loss-threshold"}; break;
  }
  o.only = row;
  const SuiteResult res = compare_suite(records, split(), ae, emb, o);
  write_text_file(options_.output / ("classify-" + std::string(classifier_kind_name(spec.kind)) + ".csv"),
                  suite_csv(res));
  for (const auto& r : res.rows)
    note("classify " + r.feature_space + "/" + r.classifier + " at " + format_double(r.training_fraction) +
         ": rule " + r.rule + ", precision " + format_double(r.report.precision) + ", recall " +
         format_double(r.report.recall) + ", F1 " + format_double(r.report.f1));
  for (const auto& n : res.notices) note("note: " + n);
  finish("classify");
  return res;
}

SuiteResult Pipeline::compare() {
  begin("compare");
  need(embedding_path(), "embed");
  const auto records = cohort_spectra();
  const AeModel ae = load_ae_model(ae_base());
  const Embedding emb = embedding_from_json(json::parse(read_text_file(embedding_path())));
  const SuiteResult res = compare_suite(records, split(), ae, emb, suite_options());
  write_text_file(comparison_csv(), suite_csv(res));
  const std::string table = suite_table(res, reference_footer(config_.task));
  write_text_file(options_.output / "comparison.txt", table);
  note(table);
  finish("compare");
  return res;
}

void Pipeline::export_plot_data() {
  begin("export-plot-data");
  need(embedding_path(), "embed");
  const auto records = cohort_spectra();
  const AeModel ae = load_ae_model(ae_base());
  const Embedding emb = embedding_from_json(json::parse(read_text_file(embedding_path())));
  require(emb.axes.rows() >= 2, "plot data needs a latent space of at least 2 dimensions");
  const double threshold = label_threshold();
  std::ostringstream out;
  out << "variant_id,PC1,PC2,loss,label,architecture,init_param,training_fraction\n";
  for (const auto& r : records) {
    const Vector pc = pca_project(emb, ae_encode(ae, r.values), 2);
    out << r.variant_id << ',' << csv_double(pc[0]) << ',' << csv_double(pc[1]) << ','
        << csv_double(r.target_loss) << ',' << (r.target_loss < threshold ? 1 : 0) << ','
        << architecture_name(r.architecture) << ',' << csv_double(r.init_param) << ','
        << csv_double(r.training_fraction) << '\n';
  }
  write_text_file(plot_data_path(), out.str());
  note("export-plot-data: " + std::to_string(records.size()) + " rows -> " + plot_data_path().string());
  finish("export-plot-data");
}

SuiteResult Pipeline::run_all() {
  gen_variants();
  train_variants();
  compute_le();
  train_ae();
  embed();
  ClassifierSpec spec;
  if (config_.fixed_tau) {
    spec.kind = ClassifierKind::PC1FixedThreshold;
    spec.tau = *config_.fixed_tau;
  }
  classify(spec);
  SuiteResult res = compare();
  export_plot_data();
  return res;
}

}  // namespace lyap
