#include "lyap/classify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "lyap/error.hpp"
#include "lyap/parallel.hpp"
#include "lyap/variants.hpp"

namespace lyap {

namespace {

constexpr std::size_t kBoundary = static_cast<std::size_t>(-1);

struct KindName {
  ClassifierKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {ClassifierKind::PC1Median, "pc1-median"},
    {ClassifierKind::PC1FixedThreshold, "pc1-fixed"},
    {ClassifierKind::MultiPCSubspace, "subspace"},
    {ClassifierKind::LinearRegression, "lin-reg"},
    {ClassifierKind::LEMeanMedian, "le-mean-median"},
    {ClassifierKind::LEMaxMedian, "le-max-median"},
    {ClassifierKind::LEPCAMedian, "le-pca-median"},
    {ClassifierKind::LossAtEpochThreshold, "loss-threshold"},
};

bool is_median_kind(ClassifierKind k) {
  return k == ClassifierKind::PC1Median || k == ClassifierKind::LEMeanMedian ||
         k == ClassifierKind::LEMaxMedian || k == ClassifierKind::LEPCAMedian;
}

bool below_or_above(Orientation o, double x, double threshold) {
  return o == Orientation::BelowIsPositive ? x < threshold : x > threshold;
}

double f1_of(std::size_t tp, std::size_t predicted, std::size_t positives) {
  const std::size_t den = predicted + positives;
  return den == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

double train_f1_threshold(std::span<const LabeledSample> train, Orientation o, double threshold) {
  std::size_t tp = 0, pred = 0, pos = 0;
  for (const auto& s : train) {
    const bool p = below_or_above(o, s.features[0], threshold);
    pred += p;
    pos += s.label;
    tp += p && s.label;
  }
  return f1_of(tp, pred, pos);
}

std::size_t cell_of(const Classifier& c, std::span<const double> x) {
  std::size_t cell = 0;
  for (std::size_t j = 0; j < c.spec.dims; ++j) {
    if (x[j] == c.medians[j]) return kBoundary;
    if (x[j] > c.medians[j]) cell |= std::size_t{1} << j;
  }
  return cell;
}

void fit_subspace(Classifier& c, std::span<const LabeledSample> train) {
  const std::size_t d = c.spec.dims;
  c.medians.resize(d);
  std::vector<double> col(train.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < train.size(); ++i) col[i] = train[i].features[j];
    c.medians[j] = median(col);
  }
  const std::size_t cells = std::size_t{1} << d;
  std::vector<std::size_t> count(cells, 0), hits(cells, 0);
  std::size_t positives = 0;
  for (const auto& s : train) {
    positives += s.label;
    const std::size_t cell = cell_of(c, s.features);
    if (cell == kBoundary) continue;
    ++count[cell];
    hits[cell] += s.label;
  }
  c.positive_cells.assign(cells, 0);

  if (cells <= 16) {
    // every proper union of cells; ties go to fewer cells, then the lower mask
    const std::uint32_t full = (std::uint32_t{1} << cells) - 1;
    std::uint32_t best_mask = 1;
    double best_f1 = -1.0;
    int best_pop = 0;
    for (std::uint32_t mask = 1; mask < full; ++mask) {
      std::size_t tp = 0, pred = 0;
      for (std::size_t k = 0; k < cells; ++k)
        if (mask >> k & 1u) {
          tp += hits[k];
          pred += count[k];
        }
      const double f1 = f1_of(tp, pred, positives);
      const int pop = std::popcount(mask);
      if (f1 > best_f1 || (f1 == best_f1 && pop < best_pop)) {
        best_f1 = f1;
        best_mask = mask;
        best_pop = pop;
      }
    }
    for (std::size_t k = 0; k < cells; ++k) c.positive_cells[k] = best_mask >> k & 1u;
    return;
  }

  // F1 is a ratio of sums over cells, so an optimal union is a prefix of the
  // occupied cells ordered by hit rate.
  std::vector<std::size_t> occupied;
  for (std::size_t k = 0; k < cells; ++k)
    if (count[k] > 0) occupied.push_back(k);
  std::stable_sort(occupied.begin(), occupied.end(), [&](std::size_t a, std::size_t b) {
    return hits[a] * count[b] > hits[b] * count[a];
  });
  const std::size_t max_len = occupied.size() > 1 ? occupied.size() - 1 : occupied.size();
  std::size_t tp = 0, pred = 0, best_len = 0;
  double best_f1 = 0.0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    tp += hits[occupied[len - 1]];
    pred += count[occupied[len - 1]];
    const double f1 = f1_of(tp, pred, positives);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_len = len;
    }
  }
  for (std::size_t i = 0; i < best_len; ++i) c.positive_cells[occupied[i]] = 1;
}

void fit_regression(Classifier& c, std::span<const LabeledSample> train) {
  const std::size_t n = train.size(), p = c.feature_dim;
  c.feature_mean.assign(p, 0.0);
  c.feature_scale.assign(p, 1.0);
  for (const auto& s : train)
    for (std::size_t j = 0; j < p; ++j) c.feature_mean[j] += s.features[j];
  for (double& m : c.feature_mean) m /= static_cast<double>(n);
  for (std::size_t j = 0; j < p; ++j) {
    double ss = 0.0;
    for (const auto& s : train) ss += (s.features[j] - c.feature_mean[j]) * (s.features[j] - c.feature_mean[j]);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    c.feature_scale[j] = sd < 1e-12 ? 1.0 : sd;
  }
  double ybar = 0.0;
  for (const auto& s : train) ybar += s.label;
  ybar /= static_cast<double>(n);

  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      x(i, j) = (train[i].features[j] - c.feature_mean[j]) / c.feature_scale[j];
    y(i) = (train[i].label ? 1.0 : 0.0) - ybar;
  }
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += c.spec.ridge * static_cast<double>(n);
  const Eigen::VectorXd w = gram.ldlt().solve(x.transpose() * y);
  c.weights.assign(w.data(), w.data() + p);
  c.intercept = ybar;
}

}  // namespace

std::string_view classifier_kind_name(ClassifierKind k) {
  for (const auto& e : kKindNames)
    if (e.kind == k) return e.name;
  return "unknown";
}

std::optional<ClassifierKind> parse_classifier_kind(std::string_view s) {
  for (const auto& e : kKindNames)
    if (s == e.name) return e.kind;
  return std::nullopt;
}

void ClassifierSpec::validate() const {
  require(std::isfinite(tau), "threshold must be finite");
  if (kind == ClassifierKind::MultiPCSubspace)
    require(dims == 1 || dims == 2 || dims == 4 || dims == 10, "subspace dims must be 1, 2, 4 or 10");
  require(ridge > 0.0, "ridge must be positive");
}

double median(std::span<const double> values) {
  require(!values.empty(), "median of an empty set");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

Classifier fit_classifier(const ClassifierSpec& spec, std::span<const LabeledSample> train) {
  spec.validate();
  require(!train.empty(), "training set is empty");
  Classifier c;
  c.spec = spec;
  c.feature_dim = train.front().features.size();
  for (const auto& s : train) {
    require(s.features.size() == c.feature_dim, "training samples differ in feature length");
    for (double v : s.features) require(std::isfinite(v), "non-finite feature in " + s.variant_id);
  }
  const std::size_t need = spec.kind == ClassifierKind::MultiPCSubspace ? spec.dims : 1;
  require(c.feature_dim >= need, std::string(classifier_kind_name(spec.kind)) + " needs " +
                                     std::to_string(need) + " feature(s), got " +
                                     std::to_string(c.feature_dim));

  const bool fixed = spec.kind == ClassifierKind::PC1FixedThreshold ||
                     spec.kind == ClassifierKind::LossAtEpochThreshold;
  if (fixed) {
    c.threshold = spec.tau;
    c.orientation = spec.orientation.value_or(Orientation::BelowIsPositive);
    return c;
  }

  const std::size_t positives =
      static_cast<std::size_t>(std::count_if(train.begin(), train.end(), [](auto& s) { return s.label; }));
  if (positives == 0 || positives == train.size()) {
    c.constant = positives > 0;
    return c;
  }

  if (is_median_kind(spec.kind)) {
    std::vector<double> x;
    for (const auto& s : train) x.push_back(s.features[0]);
    c.threshold = median(x);
    if (spec.orientation) {
      c.orientation = *spec.orientation;
    } else {
      const double below = train_f1_threshold(train, Orientation::BelowIsPositive, c.threshold);
      const double above = train_f1_threshold(train, Orientation::AboveIsPositive, c.threshold);
      c.orientation = above > below ? Orientation::AboveIsPositive : Orientation::BelowIsPositive;
    }
  } else if (spec.kind == ClassifierKind::MultiPCSubspace) {
    fit_subspace(c, train);
  } else {
    fit_regression(c, train);
  }
  return c;
}

bool predict(const Classifier& c, std::span<const double> features) {
  const auto kind = c.spec.kind;
  if (kind == ClassifierKind::LinearRegression)
    require(features.size() == c.feature_dim, "feature length " + std::to_string(features.size()) +
                                                  " does not match the classifier (" +
                                                  std::to_string(c.feature_dim) + ")");
  else
    require(features.size() >= (kind == ClassifierKind::MultiPCSubspace ? c.spec.dims : 1),
            "too few features for " + std::string(classifier_kind_name(kind)));
  if (c.constant) return *c.constant;
  switch (kind) {
    case ClassifierKind::MultiPCSubspace: {
      const std::size_t cell = cell_of(c, features);
      return cell != kBoundary && c.positive_cells[cell];
    }
    case ClassifierKind::LinearRegression: {
      double y = c.intercept;
      for (std::size_t j = 0; j < c.feature_dim; ++j)
        y += c.weights[j] * (features[j] - c.feature_mean[j]) / c.feature_scale[j];
      return y > 0.5;
    }
    default:
      return below_or_above(c.orientation, features[0], c.threshold);
  }
}

EvalReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

EvalReport evaluate(const Classifier& c, std::span<const LabeledSample> test) {
  require(!test.empty(), "test set is empty");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& s : test) {
    const bool p = predict(c, s.features);
    if (p && s.label) ++tp;
    else if (p) ++fp;
    else if (s.label) ++fn;
    else ++tn;
  }
  EvalReport r = report_from_counts(tp, fp, tn, fn);
  r.degenerate = c.constant.has_value();
  return r;
}

std::string describe(const Classifier& c) {
  if (c.constant) return *c.constant ? "always positive" : "always negative";
  const char* op = c.orientation == Orientation::BelowIsPositive ? " < " : " > ";
  switch (c.spec.kind) {
    case ClassifierKind::MultiPCSubspace: {
      std::string out = "medians [";
      for (std::size_t j = 0; j < c.medians.size(); ++j)
        out += (j ? " " : "") + format_double(c.medians[j]);
      out += "], positive cells {";
      bool first = true;
      for (std::size_t k = 0; k < c.positive_cells.size(); ++k)
        if (c.positive_cells[k]) {
          out += (first ? "" : " ") + std::to_string(k);
          first = false;
        }
      return out + "}";
    }
    case ClassifierKind::LinearRegression:
      return "least-squares score on " + std::to_string(c.feature_dim) + " standardized features > 0.5";
    default:
      return std::string("x0") + op + format_double(c.threshold);
  }
}

namespace {

ClassifierSpec spec_of(ClassifierKind k) {
  ClassifierSpec s;
  s.kind = k;
  return s;
}

struct Job {
  std::string feature_space;
  std::string classifier;
  ClassifierSpec spec;
  std::function<Vector(const SpectrumRecord&)> features;
};

}  // namespace

SuiteResult compare_suite(std::span<const SpectrumRecord> records, const CohortSplit& split,
                          const AeModel& ae, const Embedding& embedding, const SuiteOptions& options) {
  require(!records.empty(), "cohort is empty");
  const std::size_t len = records.front().values.size();
  for (const auto& r : records)
    require(r.values.size() == len, "spectra must share one length; " + r.variant_id + " differs");
  const std::set<std::string> train_ids(split.train_ids.begin(), split.train_ids.end());
  const std::set<std::string> test_ids(split.test_ids.begin(), split.test_ids.end());
  for (const auto& id : test_ids) require(!train_ids.contains(id), "variant " + id + " is in both splits");

  std::set<double> fractions;
  for (const auto& r : records) fractions.insert(r.training_fraction);
  auto group = [&](const std::set<std::string>& ids, double f) {
    std::vector<const SpectrumRecord*> out;
    for (const auto& r : records)
      if (r.training_fraction == f && ids.contains(r.variant_id)) out.push_back(&r);
    return out;
  };

  SuiteResult result;
  const std::size_t latent_pcs = embedding.axes.rows();
  const std::size_t reg_pcs = std::min(options.regression_pcs, latent_pcs);
  std::size_t max_dims = reg_pcs;
  for (auto d : options.subspace_dims) {
    if (d > latent_pcs)
      result.notices.push_back("subspace-d" + std::to_string(d) + " skipped: latent space has only " +
                               std::to_string(latent_pcs) + " components");
    else
      max_dims = std::max(max_dims, d);
  }

  std::vector<const SpectrumRecord*> pooled_group;
  if (options.pooled)
    for (const auto& r : records)
      if (train_ids.contains(r.variant_id)) pooled_group.push_back(&r);

  for (double f : fractions) {
    const double fit_f = options.fit_fraction.value_or(f);
    const auto fit_group = options.pooled ? pooled_group : group(train_ids, fit_f);
    const auto test_group = group(test_ids, f);
    if (fit_group.size() < 2 || test_group.empty()) {
      result.notices.push_back("fraction " + format_double(f) + " skipped: " +
                               std::to_string(fit_group.size()) + " training and " +
                               std::to_string(test_group.size()) + " test records");
      continue;
    }
    std::vector<Vector> fit_spectra;
    for (auto* r : fit_group) fit_spectra.push_back(r->values);
    const Embedding le_pca = pca_fit(fit_spectra);

    std::vector<Job> jobs;
    auto ae_pcs = [&](const SpectrumRecord& r) {
      return pca_project(embedding, ae_encode(ae, r.values), max_dims);
    };
    auto first_pcs = [ae_pcs](std::size_t k) {
      return [ae_pcs, k](const SpectrumRecord& r) {
        auto v = ae_pcs(r);
        v.resize(k);
        return v;
      };
    };
    jobs.push_back({"aelle-pca", "pc1-median", spec_of(ClassifierKind::PC1Median), first_pcs(1)});
    if (options.fixed_tau) {
      ClassifierSpec s = spec_of(ClassifierKind::PC1FixedThreshold);
      s.tau = *options.fixed_tau;
      s.orientation = Orientation::BelowIsPositive;
      jobs.push_back({"aelle-pca", "pc1-fixed", s, first_pcs(1)});
    }
    for (auto d : options.subspace_dims) {
      if (d > latent_pcs) continue;
      ClassifierSpec s = spec_of(ClassifierKind::MultiPCSubspace);
      s.dims = d;
      jobs.push_back({"aelle-pca", "subspace-d" + std::to_string(d), s, first_pcs(d)});
    }
    jobs.push_back({"aelle-pca", "lin-reg", spec_of(ClassifierKind::LinearRegression), first_pcs(reg_pcs)});
    jobs.push_back({"le-raw", "lin-reg", spec_of(ClassifierKind::LinearRegression),
                    [](const SpectrumRecord& r) { return r.values; }});
    jobs.push_back({"le-pca", "pc1-median", spec_of(ClassifierKind::LEPCAMedian),
                    [&le_pca](const SpectrumRecord& r) { return pca_project(le_pca, r.values, 1); }});
    jobs.push_back({"le-stats", "mean-median", spec_of(ClassifierKind::LEMeanMedian),
                    [](const SpectrumRecord& r) { return Vector{spectrum_stats(r.values).mean}; }});
    jobs.push_back({"le-stats", "max-median", spec_of(ClassifierKind::LEMaxMedian),
                    [](const SpectrumRecord& r) { return Vector{spectrum_stats(r.values).max}; }});

    std::string missing;
    for (const auto* g : {&fit_group, &test_group})
      for (auto* r : *g) {
        auto it = options.loss_at_fraction.find(r->variant_id);
        if (missing.empty() &&
            (it == options.loss_at_fraction.end() || !it->second.contains(r->training_fraction)))
          missing = r->variant_id;
      }
    if (missing.empty()) {
      ClassifierSpec s = spec_of(ClassifierKind::LossAtEpochThreshold);
      s.tau = options.label_threshold;
      s.orientation = Orientation::BelowIsPositive;
      const auto* losses = &options.loss_at_fraction;
      jobs.push_back({"loss-at-epoch", "loss-threshold", s, [losses](const SpectrumRecord& r) {
                        return Vector{losses->at(r.variant_id).at(r.training_fraction)};
                      }});
    } else {
      result.notices.push_back("loss-at-epoch rows omitted at fraction " + format_double(f) +
                               ": no per-epoch loss for " + missing);
    }

    auto samples = [&](const std::vector<const SpectrumRecord*>& g, const Job& job) {
      std::vector<LabeledSample> out;
      out.reserve(g.size());
      for (auto* r : g)
        out.push_back({job.features(*r), r->target_loss < options.label_threshold, r->variant_id,
                       r->training_fraction});
      return out;
    };
    if (options.only)
      std::erase_if(jobs, [&](const Job& j) {
        return j.feature_space != options.only->first || j.classifier != options.only->second;
      });
    std::vector<SuiteRow> rows(jobs.size());
    parallel_for(jobs.size(), options.threads, [&](std::size_t i) {
      const auto& job = jobs[i];
      const auto train = samples(fit_group, job);
      const auto test = samples(test_group, job);
      const Classifier c = fit_classifier(job.spec, train);
      rows[i] = {job.feature_space, job.classifier, f, evaluate(c, test), describe(c)};
    });
    for (auto& row : rows) result.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string suite_csv(const SuiteResult& result) {
  std::ostringstream out;
  out << "feature_space,classifier,training_fraction,precision,recall,f1,tp,fp,tn,fn\n";
  for (const auto& r : result.rows)
    out << r.feature_space << ',' << r.classifier << ',' << format_double(r.training_fraction) << ','
        << format_double(r.report.precision) << ',' << format_double(r.report.recall) << ','
        << format_double(r.report.f1) << ',' << r.report.tp << ',' << r.report.fp << ','
        << r.report.tn << ',' << r.report.fn << '\n';
  return out.str();
}

std::string suite_table(const SuiteResult& result, std::string_view footer) {
  const std::vector<std::string> head{"feature_space", "classifier", "training_fraction", "precision",
                                      "recall",        "f1",         "tp",                "fp",
                                      "tn",            "fn"};
  std::vector<std::vector<std::string>> cells{head};
  for (const auto& r : result.rows)
    cells.push_back({r.feature_space, r.classifier, format_double(r.training_fraction),
                     fixed4(r.report.precision), fixed4(r.report.recall), fixed4(r.report.f1),
                     std::to_string(r.report.tp), std::to_string(r.report.fp),
                     std::to_string(r.report.tn), std::to_string(r.report.fn) +
                                                      (r.report.degenerate ? " (one-class fit)" : "")});
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string& s = row[i];
      if (i < 2) out << s << std::string(width[i] - s.size(), ' ');
      else out << std::string(width[i] - s.size(), ' ') << s;
      out << (i + 1 < row.size() ? "  " : "\n");
    }
  }
  for (const auto& n : result.notices) out << "note: " << n << '\n';
  if (!footer.empty()) out << footer << '\n';
  return out.str();
}

}  // namespace lyap
