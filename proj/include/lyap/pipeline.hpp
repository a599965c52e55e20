#pragma once

// Experiment configuration and the pipeline stages driven by the CLI:
// gen-variants, train-variants, compute-le, train-ae, embed, classify,
// compare, export-plot-data. Every stage reads its inputs from and writes
// its outputs under one output directory.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lyap/aelle.hpp"
#include "lyap/classify.hpp"
#include "lyap/cohort.hpp"
#include "lyap/force.hpp"
#include "lyap/lyapunov.hpp"
#include "lyap/supervised.hpp"
#include "lyap/variants.hpp"

namespace lyap {

inline constexpr std::string_view kStageNames[] = {
    "gen-variants", "train-variants", "compute-le", "train-ae",
    "embed",        "classify",       "compare",    "export-plot-data"};

struct DatasetConfig {
  // smnist: directory with images-idx3-ubyte and labels-idx1-ubyte.
  // char-rnn: a UTF-8 text file. Relative paths resolve against the data root.
  std::string path;
  bool downsample2 = true;
  std::size_t seq_len = 101;
  std::size_t train_examples = 0;  // 0: everything not held out
  std::size_t validation_examples = 1000;
};

struct ExperimentConfig {
  std::string name;
  Task task = Task::TargetLearning;
  std::uint64_t seed = 0;
  bool long_running = false;

  VariantGrid grid;  // task, master_seed and input_size are filled in from the rest
  ForceConfig force;
  SupervisedTrainConfig training;
  DatasetConfig dataset;
  std::vector<double> checkpoint_fractions{1.0};

  LEConfig le;
  double le_input_scale = 0.1;  // target-learning: N(0, scale^2) input noise

  AeConfig autoencoder;
  std::vector<double> split{0.8, 0.2};  // train / [validation /] test, by variant

  std::optional<double> label_threshold;  // unset: cohort median of target_loss
  std::optional<double> fixed_tau = -0.03;
  std::vector<std::size_t> subspace_dims{1, 2, 4, 10};
  std::optional<double> fit_fraction;  // unset: fit once on every fraction

  void validate() const;
};

ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);
// 16 hex digits of FNV-1a over the canonical JSON form.
std::string config_hash(const ExperimentConfig& c);

// Bundled presets live in LYAP_CONFIG_DIR (environment) or the source tree.
std::filesystem::path preset_path(std::string_view name);
std::filesystem::path data_root();

std::string_view tool_version();

struct RunOptions {
  std::filesystem::path output;
  std::size_t threads = 1;
  std::ostream* log = nullptr;
};

class Pipeline {
 public:
  Pipeline(ExperimentConfig config, RunOptions options);

  const ExperimentConfig& config() const { return config_; }
  const std::filesystem::path& output() const { return options_.output; }

  void gen_variants();
  void train_variants();
  void compute_le();
  void train_ae();
  void embed();
  SuiteResult classify(const ClassifierSpec& spec);
  SuiteResult compare();
  void export_plot_data();
  // Every stage in order; classify runs the fixed PC1 threshold.
  SuiteResult run_all();

  std::filesystem::path cohort_dir() const { return options_.output / "cohort"; }
  std::filesystem::path manifest_path() const { return options_.output / "manifest.json"; }
  std::filesystem::path split_path() const { return options_.output / "split.json"; }
  std::filesystem::path ae_base() const { return options_.output / "ae" / "model"; }
  std::filesystem::path embedding_path() const { return options_.output / "embedding.json"; }
  std::filesystem::path embedded_path() const { return options_.output / "embedded.jsonl"; }
  std::filesystem::path comparison_csv() const { return options_.output / "comparison.csv"; }
  std::filesystem::path plot_data_path() const { return options_.output / "plot_data.csv"; }

  double label_threshold() const;
  CohortSplit split() const;

 private:
  void begin(std::string_view stage, bool fresh = false);
  void finish(std::string_view stage);
  void need(const std::filesystem::path& p, std::string_view producer) const;
  void note(const std::string& line) const;
  SuiteOptions suite_options() const;
  std::vector<SpectrumRecord> cohort_spectra() const;

  ExperimentConfig config_;
  RunOptions options_;
};

}  // namespace lyap
