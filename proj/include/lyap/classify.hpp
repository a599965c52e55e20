#pragma once

// Binary "high accuracy" classifiers over spectra, their statistics and
// latent PC coordinates, and the precision/recall/F1 harness.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lyap/aelle.hpp"
#include "lyap/lyapunov.hpp"

namespace lyap {

enum class ClassifierKind {
  PC1Median,
  PC1FixedThreshold,
  MultiPCSubspace,
  LinearRegression,
  LEMeanMedian,
  LEMaxMedian,
  LEPCAMedian,
  LossAtEpochThreshold,
};

enum class Orientation { BelowIsPositive, AboveIsPositive };

std::string_view classifier_kind_name(ClassifierKind k);
std::optional<ClassifierKind> parse_classifier_kind(std::string_view s);

struct LabeledSample {
  Vector features;
  bool label = false;
  std::string variant_id;
  double training_fraction = 1.0;
};

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::PC1Median;
  double tau = -0.03;                      // fixed-threshold kinds
  std::size_t dims = 1;                    // MultiPCSubspace
  std::optional<Orientation> orientation;  // unset: threshold kinds pick by training F1
  double ridge = 1e-6;                     // LinearRegression

  void validate() const;
};

struct Classifier {
  ClassifierSpec spec;
  std::size_t feature_dim = 0;
  Orientation orientation = Orientation::BelowIsPositive;
  double threshold = 0.0;
  Vector medians;                     // subspace
  std::vector<char> positive_cells;   // subspace, 2^dims entries
  Vector weights;                     // regression, standardized features
  Vector feature_mean, feature_scale; // regression
  double intercept = 0.0;             // regression
  std::optional<bool> constant;       // one-class training set
};

struct EvalReport {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  bool degenerate = false;
};

// Mean of the middle pair for even counts.
double median(std::span<const double> values);

Classifier fit_classifier(const ClassifierSpec& spec, std::span<const LabeledSample> train);
bool predict(const Classifier& c, std::span<const double> features);
EvalReport evaluate(const Classifier& c, std::span<const LabeledSample> test);
EvalReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

// Human-readable decision rule, e.g. "x0 < -0.03".
std::string describe(const Classifier& c);

// Comparison of every feature space / classifier pair.

struct CohortSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct SuiteOptions {
  double label_threshold = 0.0;  // positive: target_loss < threshold
  // Fit everything at this fraction and apply it to all others; unset fits
  // each fraction on its own records.
  std::optional<double> fit_fraction;
  // Fit once on training records of every fraction; overrides fit_fraction.
  bool pooled = false;
  // Restrict the suite to one (feature_space, classifier) row.
  std::optional<std::pair<std::string, std::string>> only;
  std::vector<std::size_t> subspace_dims{1, 2, 4, 10};
  std::size_t regression_pcs = 10;
  std::optional<double> fixed_tau;  // adds the fixed PC1 threshold row
  // variant_id -> (training_fraction -> validation loss at that point)
  std::map<std::string, std::map<double, double>> loss_at_fraction;
  std::size_t threads = 1;
};

struct SuiteRow {
  std::string feature_space;
  std::string classifier;
  double training_fraction = 0.0;
  EvalReport report;
  std::string rule;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;
  std::vector<std::string> notices;
};

// `embedding` is the PCA of AeLLE latents. Spectra must share one length.
SuiteResult compare_suite(std::span<const SpectrumRecord> records, const CohortSplit& split,
                          const AeModel& ae, const Embedding& embedding, const SuiteOptions& options);

std::string suite_csv(const SuiteResult& result);
std::string suite_table(const SuiteResult& result, std::string_view footer = {});

}  // namespace lyap
