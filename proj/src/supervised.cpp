#include "lyap/supervised.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lyap/error.hpp"
#include "lyap/kernels.hpp"
#include "lyap/rng.hpp"

namespace lyap {

namespace {

Matrix column_of(const Vector& v) {
  Matrix m(v.size(), 1);
  m.values() = v;
  return m;
}

void add_gemv(const Matrix& a, const double* x, double* y) {
  Vector tmp(a.rows());
  kernels::active().gemv(a.data(), a.rows(), a.cols(), x, tmp.data());
  for (std::size_t i = 0; i < tmp.size(); ++i) y[i] += tmp[i];
}

// y += A^T x
void add_gemv_t(const Matrix& a, const double* x, double* y) {
  const auto& kt = kernels::active();
  for (std::size_t r = 0; r < a.rows(); ++r) kt.axpy(x[r], a.row(r).data(), y, a.cols());
}

void add_outer(Matrix& a, const double* x, const double* y) {
  kernels::active().ger(1.0, x, y, a.data(), a.rows(), a.cols());
}

void add_to(Matrix& bias, const double* x) {
  for (std::size_t i = 0; i < bias.size(); ++i) bias.values()[i] += x[i];
}

Vector softmax(const Vector& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

// Per-step activations kept for the backward pass.
struct StepCache {
  Vector prev;   // state entering the step (h, or h then c for LSTM)
  Vector gates;  // architecture-specific
  Vector next;
  Vector extra;  // GRU: W_hh h + b_hh
};

std::vector<StepCache> forward(const Cell& cell, const Matrix& inputs) {
  const std::size_t h = cell.hidden_size();
  const auto arch = cell.spec().architecture;
  std::vector<StepCache> caches(inputs.rows());
  Vector state(cell.state_dim(), 0.0);
  const Matrix& w_ih = cell.param("W_ih");
  const Matrix& w_hh = cell.param("W_hh");
  for (std::size_t t = 0; t < inputs.rows(); ++t) {
    StepCache& c = caches[t];
    c.prev = state;
    const double* x = inputs.row(t).data();
    switch (arch) {
      case Architecture::VanillaRNN: {
        Vector a(cell.param("b").values());
        add_gemv(w_ih, x, a.data());
        add_gemv(w_hh, state.data(), a.data());
        for (double& v : a) v = std::tanh(v);
        c.next = a;
        break;
      }
      case Architecture::LSTM: {
        Vector pre(cell.param("b").values());
        add_gemv(w_ih, x, pre.data());
        add_gemv(w_hh, state.data(), pre.data());
        for (std::size_t j = 0; j < h; ++j) {
          pre[j] = sigmoid(pre[j]);
          pre[h + j] = sigmoid(pre[h + j]);
          pre[2 * h + j] = std::tanh(pre[2 * h + j]);
          pre[3 * h + j] = sigmoid(pre[3 * h + j]);
        }
        c.next.assign(2 * h, 0.0);
        for (std::size_t j = 0; j < h; ++j) {
          const double cc = pre[h + j] * state[h + j] + pre[j] * pre[2 * h + j];
          c.next[h + j] = cc;
          c.next[j] = pre[3 * h + j] * std::tanh(cc);
        }
        c.gates = std::move(pre);
        break;
      }
      case Architecture::GRU: {
        Vector gi(cell.param("b_ih").values());
        Vector gh(cell.param("b_hh").values());
        add_gemv(w_ih, x, gi.data());
        add_gemv(w_hh, state.data(), gh.data());
        c.gates.assign(3 * h, 0.0);
        c.next.assign(h, 0.0);
        for (std::size_t j = 0; j < h; ++j) {
          const double r = sigmoid(gi[j] + gh[j]);
          const double z = sigmoid(gi[h + j] + gh[h + j]);
          const double n = std::tanh(gi[2 * h + j] + r * gh[2 * h + j]);
          c.gates[j] = r;
          c.gates[h + j] = z;
          c.gates[2 * h + j] = n;
          c.next[j] = (1.0 - z) * n + z * state[j];
        }
        c.extra = std::move(gh);
        break;
      }
      default:
        throw ContractError("BPTT supports rnn, lstm and gru cells, not " +
                            std::string(architecture_name(arch)));
    }
    state = c.next;
  }
  return caches;
}

Vector logits_of(const SequenceModel& m, const Vector& final_state) {
  Vector logits = m.out_b;
  add_gemv(m.out_w, final_state.data(), logits.data());
  return logits;
}

}  // namespace

SequenceModel init_sequence_model(const CellSpec& spec, std::size_t num_classes) {
  require(num_classes >= 2, "classification needs at least 2 classes");
  SequenceModel m{init_cell(spec), Matrix(num_classes, spec.hidden_size), Vector(num_classes)};
  Rng rng(derive_seed(spec.seed, 0x7265616430ULL));
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.hidden_size));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& w : m.out_w.values()) w = u(rng);
  for (double& b : m.out_b) b = u(rng);
  return m;
}

std::vector<Matrix> flatten_model(const SequenceModel& model) {
  std::vector<Matrix> out;
  for (const auto& p : model.cell.params()) out.push_back(p.value);
  out.push_back(model.out_w);
  out.push_back(column_of(model.out_b));
  return out;
}

SequenceModel unflatten_model(const CellSpec& spec, const std::vector<Matrix>& tensors) {
  auto layout = param_layout(spec);
  require(tensors.size() == layout.size() + 2, "tensor count does not match the model");
  for (std::size_t i = 0; i < layout.size(); ++i) layout[i].value = tensors[i];
  return {Cell(spec, std::move(layout)), tensors[tensors.size() - 2], tensors.back().values()};
}

void save_model(const std::filesystem::path& base, const SequenceModel& model, json meta) {
  meta["cell_spec"] = cell_spec_to_json(model.cell.spec());
  auto tensors = model.cell.params();
  tensors.push_back({"out_w", model.out_w});
  tensors.push_back({"out_b", column_of(model.out_b)});
  save_tensors(base, {std::move(tensors), meta});
}

SequenceModel load_model(const std::filesystem::path& base) {
  const auto bundle = load_tensors(base);
  if (!bundle.meta.contains("cell_spec"))
    throw FormatError(base.string() + ": checkpoint has no cell_spec");
  const CellSpec spec = cell_spec_from_json(bundle.meta["cell_spec"]);
  std::vector<Matrix> tensors;
  for (const auto& t : bundle.tensors) tensors.push_back(t.value);
  try {
    return unflatten_model(spec, tensors);
  } catch (const ContractError& e) {
    throw FormatError(base.string() + ": " + e.what());
  }
}

Matrix ClassificationSet::inputs(std::size_t i) const {
  if (!dense.empty()) return dense.at(i);
  const auto& seq = tokens.at(i);
  Matrix m(seq.size() - 1, input_size);
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) m(t, static_cast<std::size_t>(seq[t])) = 1.0;
  return m;
}

ClassificationSet images_subset(const RowImageDataset& ds, std::span<const std::size_t> indices) {
  ClassificationSet out;
  out.input_size = ds.width;
  out.num_classes = 10;
  for (std::size_t i : indices) {
    out.dense.push_back(ds.images.at(i));
    out.labels.push_back(ds.labels.at(i));
  }
  return out;
}

ClassificationSet char_subset(const CharDataset& ds, std::span<const std::size_t> indices) {
  ClassificationSet out;
  out.input_size = ds.vocabulary.size();
  out.num_classes = ds.vocabulary.size();
  for (std::size_t i : indices) {
    out.tokens.push_back(ds.sequences.at(i));
    out.labels.push_back(ds.sequences.at(i).back());
  }
  return out;
}

void SupervisedTrainConfig::validate() const {
  require(epochs >= 1, "epochs must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(gradient_clip > 0.0, "gradient_clip must be > 0");
  for (double f : checkpoint_fractions)
    require(f >= 0.0 && f <= 1.0, "checkpoint fractions must lie in [0, 1]");
}

Vector predict_proba(const SequenceModel& model, const Matrix& inputs) {
  const auto caches = forward(model.cell, inputs);
  Vector h(model.cell.hidden_size(), 0.0);
  if (!caches.empty())
    std::copy_n(caches.back().next.begin(), model.cell.hidden_size(), h.begin());
  return softmax(logits_of(model, h));
}

double example_loss_and_gradient(const SequenceModel& model, const Matrix& inputs, int label,
                                 ModelGradient* grad) {
  const Cell& cell = model.cell;
  const std::size_t h = cell.hidden_size();
  require(inputs.cols() == cell.input_size(), "input width does not match the model");
  require(label >= 0 && static_cast<std::size_t>(label) < model.num_classes(), "label out of range");
  const auto caches = forward(cell, inputs);
  Vector h_final(h, 0.0);
  if (!caches.empty()) std::copy_n(caches.back().next.begin(), h, h_final.begin());
  const Vector p = softmax(logits_of(model, h_final));
  const double loss = -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
  if (grad == nullptr) return loss;

  auto& g = grad->tensors;
  if (g.empty()) {
    g = flatten_model(model);
    for (Matrix& m : g) m.fill(0.0);
  }
  grad->loss += loss;
  const std::size_t n_cell = cell.params().size();
  Matrix& g_out_w = g[n_cell];
  Matrix& g_out_b = g[n_cell + 1];

  Vector dlogits = p;
  dlogits[static_cast<std::size_t>(label)] -= 1.0;
  add_outer(g_out_w, dlogits.data(), h_final.data());
  add_to(g_out_b, dlogits.data());
  Vector dh(h, 0.0);
  add_gemv_t(model.out_w, dlogits.data(), dh.data());
  Vector dc(h, 0.0);

  const auto arch = cell.spec().architecture;
  const Matrix& w_hh = cell.param("W_hh");
  Matrix& g_wih = g[0];
  Matrix& g_whh = g[1];
  for (std::size_t t = caches.size(); t-- > 0;) {
    const StepCache& c = caches[t];
    const double* x = inputs.row(t).data();
    switch (arch) {
      case Architecture::VanillaRNN: {
        Vector da(h);
        for (std::size_t j = 0; j < h; ++j) da[j] = dh[j] * (1.0 - c.next[j] * c.next[j]);
        add_outer(g_wih, da.data(), x);
        add_outer(g_whh, da.data(), c.prev.data());
        add_to(g[2], da.data());
        std::fill(dh.begin(), dh.end(), 0.0);
        add_gemv_t(w_hh, da.data(), dh.data());
        break;
      }
      case Architecture::LSTM: {
        Vector dpre(4 * h);
        for (std::size_t j = 0; j < h; ++j) {
          const double ig = c.gates[j], fg = c.gates[h + j], gg = c.gates[2 * h + j],
                       og = c.gates[3 * h + j];
          const double tc = std::tanh(c.next[h + j]);
          const double dct = dc[j] + dh[j] * og * (1.0 - tc * tc);
          dpre[j] = dct * gg * ig * (1.0 - ig);
          dpre[h + j] = dct * c.prev[h + j] * fg * (1.0 - fg);
          dpre[2 * h + j] = dct * ig * (1.0 - gg * gg);
          dpre[3 * h + j] = dh[j] * tc * og * (1.0 - og);
          dc[j] = dct * fg;
        }
        add_outer(g_wih, dpre.data(), x);
        add_outer(g_whh, dpre.data(), c.prev.data());
        add_to(g[2], dpre.data());
        std::fill(dh.begin(), dh.end(), 0.0);
        add_gemv_t(w_hh, dpre.data(), dh.data());
        break;
      }
      case Architecture::GRU: {
        Vector dgi(3 * h), dgh(3 * h), dprev(h);
        for (std::size_t j = 0; j < h; ++j) {
          const double r = c.gates[j], z = c.gates[h + j], n = c.gates[2 * h + j];
          const double dn = dh[j] * (1.0 - z);
          const double dz = dh[j] * (c.prev[j] - n);
          dprev[j] = dh[j] * z;
          const double dan = dn * (1.0 - n * n);
          const double dr = dan * c.extra[2 * h + j];
          const double dar = dr * r * (1.0 - r);
          const double daz = dz * z * (1.0 - z);
          dgi[j] = dar;
          dgi[h + j] = daz;
          dgi[2 * h + j] = dan;
          dgh[j] = dar;
          dgh[h + j] = daz;
          dgh[2 * h + j] = dan * r;
        }
        add_outer(g_wih, dgi.data(), x);
        add_outer(g_whh, dgh.data(), c.prev.data());
        add_to(g[2], dgi.data());
        add_to(g[3], dgh.data());
        add_gemv_t(w_hh, dgh.data(), dprev.data());
        dh = std::move(dprev);
        break;
      }
      default:
        throw ContractError("BPTT supports rnn, lstm and gru cells");
    }
  }
  return loss;
}

double eval_loss(const SequenceModel& model, const ClassificationSet& data) {
  require(data.size() > 0, "evaluation set is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    total += example_loss_and_gradient(model, data.inputs(i), data.labels[i], nullptr);
  return total / static_cast<double>(data.size());
}

SupervisedResult bptt_train(const SequenceModel& initial, const ClassificationSet& train,
                            const ClassificationSet& validation,
                            const SupervisedTrainConfig& config) {
  config.validate();
  require(train.size() > 0 && validation.size() > 0, "train and validation sets must be non-empty");
  const CellSpec spec = initial.cell.spec();
  std::vector<Matrix> params = flatten_model(initial);
  std::vector<Matrix> m1, m2;
  for (const auto& p : params) {
    m1.emplace_back(p.rows(), p.cols());
    m2.emplace_back(p.rows(), p.cols());
  }
  const std::size_t batches_per_epoch = (train.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_updates = batches_per_epoch * config.epochs;
  auto fractions = config.checkpoint_fractions;
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());

  SupervisedResult result{initial, {}, kLossCap, {}, false};
  std::size_t next_ckpt = 0;
  auto snapshot = [&](std::size_t done, const SequenceModel& model) {
    while (next_ckpt < fractions.size() &&
           static_cast<double>(done) >= fractions[next_ckpt] * static_cast<double>(total_updates)) {
      double vl = result.failed ? kLossCap : eval_loss(model, validation);
      if (!std::isfinite(vl)) vl = kLossCap;
      result.checkpoints.push_back({fractions[next_ckpt], model, vl});
      ++next_ckpt;
    }
  };

  Rng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t update = 0;
  SequenceModel model = initial;
  snapshot(0, model);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  for (std::size_t epoch = 0; epoch < config.epochs && !result.failed; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      ModelGradient grad;
      for (std::size_t i = start; i < end; ++i)
        example_loss_and_gradient(model, train.inputs(order[i]), train.labels[order[i]], &grad);
      const double scale = 1.0 / static_cast<double>(end - start);
      double norm2 = 0.0;
      for (auto& gm : grad.tensors)
        for (double& v : gm.values()) {
          v *= scale;
          norm2 += v * v;
        }
      if (!std::isfinite(norm2) || !std::isfinite(grad.loss)) {
        result.failed = true;
        break;
      }
      const double norm = std::sqrt(norm2);
      const double clip = norm > config.gradient_clip ? config.gradient_clip / norm : 1.0;
      ++update;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(update));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(update));
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto& pv = params[k].values();
        const auto& gv = grad.tensors[k].values();
        for (std::size_t i = 0; i < pv.size(); ++i) {
          const double gi = gv[i] * clip;
          if (config.optimizer == Optimizer::SGD) {
            pv[i] -= config.learning_rate * gi;
          } else {
            double& a = m1[k].values()[i];
            double& b = m2[k].values()[i];
            a = beta1 * a + (1.0 - beta1) * gi;
            b = beta2 * b + (1.0 - beta2) * gi * gi;
            pv[i] -= config.learning_rate * (a / bc1) / (std::sqrt(b / bc2) + eps);
          }
        }
      }
      model = unflatten_model(spec, params);
      snapshot(update, model);
    }
    if (result.failed) break;
    double vl = eval_loss(model, validation);
    if (!std::isfinite(vl)) {
      result.failed = true;
      break;
    }
    result.validation_curve.push_back(vl);
    result.best_validation_loss = std::min(result.best_validation_loss, vl);
  }
  if (result.failed) {
    result.best_validation_loss = kLossCap;
    snapshot(total_updates, model);
  }
  result.model = model;
  return result;
}

}  // namespace lyap
