#include "lyap/aelle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lyap/error.hpp"
#include "lyap/kernels.hpp"
#include "lyap/rng.hpp"

namespace lyap {

namespace {

constexpr double kLossOffset = 1e-8;

DenseLayer zero_layer(std::size_t in, std::size_t out) { return {Matrix(out, in), Vector(out, 0.0)}; }

// Activations of a stack: acts[0] is the input, acts[l+1] the output of layer l.
std::vector<Vector> run_stack(const std::vector<DenseLayer>& layers, std::span<const double> x) {
  const auto& k = kernels::active();
  std::vector<Vector> acts;
  acts.reserve(layers.size() + 1);
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    Vector y(layer.w.rows());
    k.gemv(layer.w.data(), layer.w.rows(), layer.w.cols(), acts.back().data(), y.data());
    const bool hidden = l + 1 < layers.size();
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] += layer.b[i];
      if (hidden) y[i] = std::tanh(y[i]);
    }
    acts.push_back(std::move(y));
  }
  return acts;
}

// Backprop through a stack given dL/d(output). Writes into grads at `offset`
// (w, b per layer) and returns dL/d(input).
Vector back_stack(const std::vector<DenseLayer>& layers, const std::vector<Vector>& acts,
                  Vector d_out, std::vector<Matrix>& grads, std::size_t offset) {
  const auto& k = kernels::active();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    if (l + 1 < layers.size())
      for (std::size_t i = 0; i < d_out.size(); ++i) d_out[i] *= 1.0 - acts[l + 1][i] * acts[l + 1][i];
    Matrix& gw = grads[offset + 2 * l];
    Matrix& gb = grads[offset + 2 * l + 1];
    k.ger(1.0, d_out.data(), acts[l].data(), gw.data(), gw.rows(), gw.cols());
    for (std::size_t i = 0; i < d_out.size(); ++i) gb.data()[i] += d_out[i];
    Vector d_in(layer.w.cols());
    k.gemv_t(layer.w.data(), layer.w.rows(), layer.w.cols(), d_out.data(), d_in.data());
    d_out = std::move(d_in);
  }
  return d_out;
}

Matrix column(const Vector& v) {
  Matrix m(v.size(), 1);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

std::vector<Matrix> zero_like(const std::vector<Matrix>& ps) {
  std::vector<Matrix> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.emplace_back(p.rows(), p.cols());
  return out;
}

void mean_and_scale(const std::vector<double>& v, double& mean, double& scale) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  scale = sd < 1e-12 ? 1.0 : sd;
}

struct Sample {
  Vector z;
  double t;
};

struct Objective {
  double total = 0.0;
  double reconstruction = 0.0;
  double prediction_error = 0.0;  // mean |T - T_hat| or (T - T_hat)^2, unweighted
};

Objective dataset_objective(const AeModel& model, const std::vector<Sample>& data, double alpha,
                            LossNorm norm) {
  Objective o;
  for (const auto& s : data) {
    const auto out = ae_forward(model, s.z);
    const double r = ae_loss(s.z, out.reconstruction, 0.0, 0.0, 0.0, norm);
    const double e = s.t - out.prediction;
    const double p = norm == LossNorm::L1 ? std::abs(e) : e * e;
    o.reconstruction += r;
    o.prediction_error += p;
    o.total += r + alpha * p;
  }
  const double n = static_cast<double>(data.size());
  o.total /= n;
  o.reconstruction /= n;
  o.prediction_error /= n;
  return o;
}

}  // namespace

void AeConfig::validate() const {
  require(!layer_sizes.empty(), "autoencoder needs at least one encoder layer");
  for (auto s : layer_sizes) require(s >= 1, "layer sizes must be positive");
  require(alpha_max >= 0.0 && std::isfinite(alpha_max), "alpha_max must be finite and >= 0");
  require(alpha_ramp_epochs >= 1, "alpha_ramp_epochs must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_size >= 1, "batch_size must be >= 1");
}

AeModel make_ae_model(std::size_t input_size, std::span<const std::size_t> layer_sizes) {
  require(input_size >= 1 && !layer_sizes.empty(), "bad autoencoder shape");
  AeModel m;
  std::size_t prev = input_size;
  for (auto s : layer_sizes) {
    m.encoder.push_back(zero_layer(prev, s));
    prev = s;
  }
  for (std::size_t l = layer_sizes.size(); l-- > 0;) {
    const std::size_t out = l == 0 ? input_size : layer_sizes[l - 1];
    m.decoder.push_back(zero_layer(layer_sizes[l], out));
  }
  m.predictor = zero_layer(layer_sizes.back(), 1);
  m.spectrum_mean.assign(input_size, 0.0);
  m.spectrum_scale.assign(input_size, 1.0);
  return m;
}

AeModel init_ae_model(std::size_t input_size, std::span<const std::size_t> layer_sizes,
                      std::uint64_t seed) {
  AeModel m = make_ae_model(input_size, layer_sizes);
  Rng rng(derive_seed(seed, 0xae));
  auto fill = [&](DenseLayer& layer) {
    const double a = std::sqrt(6.0 / static_cast<double>(layer.w.rows() + layer.w.cols()));
    std::uniform_real_distribution<double> u(-a, a);
    for (double& v : layer.w.values()) v = u(rng);
  };
  for (auto& l : m.encoder) fill(l);
  for (auto& l : m.decoder) fill(l);
  fill(m.predictor);
  return m;
}

AeOutput ae_forward(const AeModel& model, std::span<const double> z) {
  require(z.size() == model.input_size(), "spectrum length " + std::to_string(z.size()) +
                                              " does not match autoencoder input " +
                                              std::to_string(model.input_size()));
  auto enc = run_stack(model.encoder, z);
  AeOutput out;
  out.latent = std::move(enc.back());
  auto dec = run_stack(model.decoder, out.latent);
  out.reconstruction = std::move(dec.back());
  out.prediction = model.predictor.b[0] + kernels::dot(model.predictor.w.values(), out.latent);
  return out;
}

double ae_loss(std::span<const double> z, std::span<const double> z_hat, double t, double t_hat,
               double alpha, LossNorm norm) {
  require(z.size() == z_hat.size() && !z.empty(), "reconstruction length mismatch");
  require(alpha >= 0.0, "alpha must be >= 0");
  double mse = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) mse += (z[i] - z_hat[i]) * (z[i] - z_hat[i]);
  mse /= static_cast<double>(z.size());
  const double e = t - t_hat;
  if (alpha == 0.0) return mse;
  return mse + alpha * (norm == LossNorm::L1 ? std::abs(e) : e * e);
}

double alpha_at(const AeConfig& config, std::size_t epoch) {
  const std::size_t start = config.alpha_ramp_start_epoch.value_or(config.alpha_ramp_fallback_epoch);
  if (epoch <= start) return 0.0;
  const std::size_t into = epoch - start;
  if (into >= config.alpha_ramp_epochs) return config.alpha_max;
  return config.alpha_max * static_cast<double>(into) / static_cast<double>(config.alpha_ramp_epochs);
}

std::vector<Matrix> ae_parameters(const AeModel& model) {
  std::vector<Matrix> ps;
  auto push = [&](const DenseLayer& l) {
    ps.push_back(l.w);
    ps.push_back(column(l.b));
  };
  for (const auto& l : model.encoder) push(l);
  for (const auto& l : model.decoder) push(l);
  push(model.predictor);
  return ps;
}

void set_ae_parameters(AeModel& model, const std::vector<Matrix>& params) {
  std::size_t i = 0;
  auto pull = [&](DenseLayer& l) {
    require(i + 1 < params.size(), "too few autoencoder tensors");
    require(params[i].rows() == l.w.rows() && params[i].cols() == l.w.cols() &&
                params[i + 1].size() == l.b.size(),
            "autoencoder tensor shape mismatch");
    l.w = params[i];
    l.b = params[i + 1].values();
    i += 2;
  };
  for (auto& l : model.encoder) pull(l);
  for (auto& l : model.decoder) pull(l);
  pull(model.predictor);
  require(i == params.size(), "too many autoencoder tensors");
}

std::vector<Matrix> ae_gradient(const AeModel& model, std::span<const double> z, double t,
                                double alpha, LossNorm norm, double* loss) {
  auto grads = zero_like(ae_parameters(model));
  const auto enc = run_stack(model.encoder, z);
  const Vector& latent = enc.back();
  const auto dec = run_stack(model.decoder, latent);
  const Vector& z_hat = dec.back();
  const double t_hat = model.predictor.b[0] + kernels::dot(model.predictor.w.values(), latent);
  if (loss) *loss = ae_loss(z, z_hat, t, t_hat, alpha, norm);

  const double n = static_cast<double>(z.size());
  Vector d_rec(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) d_rec[i] = 2.0 * (z_hat[i] - z[i]) / n;
  const double e = t_hat - t;
  double d_pred = 0.0;
  if (alpha > 0.0)
    d_pred = norm == LossNorm::L1 ? alpha * static_cast<double>((e > 0.0) - (e < 0.0)) : 2.0 * alpha * e;

  const std::size_t n_enc = 2 * model.encoder.size();
  const std::size_t n_dec = 2 * model.decoder.size();
  Vector d_latent = back_stack(model.decoder, dec, std::move(d_rec), grads, n_enc);
  Matrix& gpw = grads[n_enc + n_dec];
  for (std::size_t i = 0; i < latent.size(); ++i) {
    gpw.data()[i] += d_pred * latent[i];
    d_latent[i] += d_pred * model.predictor.w.data()[i];
  }
  grads[n_enc + n_dec + 1].data()[0] += d_pred;
  back_stack(model.encoder, enc, std::move(d_latent), grads, 0);
  return grads;
}

Vector standardize_spectrum(const AeModel& model, std::span<const double> spectrum) {
  require(spectrum.size() == model.input_size(), "spectrum length does not match the autoencoder");
  Vector z(spectrum.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = (spectrum[i] - model.spectrum_mean[i]) / model.spectrum_scale[i];
  return z;
}

Vector destandardize_spectrum(const AeModel& model, std::span<const double> z) {
  Vector s(z.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = z[i] * model.spectrum_scale[i] + model.spectrum_mean[i];
  return s;
}

double standardize_loss(const AeModel& model, double loss) {
  return (std::log(loss + kLossOffset) - model.target_mean) / model.target_scale;
}

double destandardize_loss(const AeModel& model, double t) {
  return std::exp(t * model.target_scale + model.target_mean) - kLossOffset;
}

Vector ae_encode(const AeModel& model, std::span<const double> spectrum) {
  return ae_forward(model, standardize_spectrum(model, spectrum)).latent;
}

AeReconstruction ae_reconstruct(const AeModel& model, std::span<const double> spectrum) {
  const auto out = ae_forward(model, standardize_spectrum(model, spectrum));
  return {destandardize_spectrum(model, out.reconstruction), destandardize_loss(model, out.prediction)};
}

AeTrainResult ae_train(std::span<const SpectrumRecord> records, const AeConfig& config) {
  config.validate();
  require(records.size() >= 20, "autoencoder training needs at least 20 records, got " +
                                    std::to_string(records.size()));
  const std::size_t len = records.front().values.size();
  for (const auto& r : records) {
    require(r.values.size() == len, "spectra must share one length (interpolate first); " +
                                        r.variant_id + " has " + std::to_string(r.values.size()));
    require(std::isfinite(r.target_loss), "target loss of " + r.variant_id + " is not finite");
  }

  AeTrainResult result;
  AeModel model = init_ae_model(len, config.layer_sizes, config.seed);
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> col;
    col.reserve(records.size());
    for (const auto& r : records) col.push_back(r.values[i]);
    mean_and_scale(col, model.spectrum_mean[i], model.spectrum_scale[i]);
  }
  {
    std::vector<double> ts;
    for (const auto& r : records) ts.push_back(std::log(r.target_loss + kLossOffset));
    mean_and_scale(ts, model.target_mean, model.target_scale);
  }
  std::vector<Sample> data;
  for (const auto& r : records)
    data.push_back({standardize_spectrum(model, r.values), standardize_loss(model, r.target_loss)});

  AeConfig sched = config;
  const bool auto_start = !config.alpha_ramp_start_epoch.has_value();
  if (auto_start) sched.alpha_ramp_start_epoch = config.epochs + config.alpha_ramp_fallback_epoch;

  std::vector<Matrix> params = ae_parameters(model);
  auto m1 = zero_like(params), m2 = zero_like(params);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;
  Rng rng(derive_seed(config.seed, 0x5eed));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  const Objective initial = dataset_objective(model, data, 0.0, config.l_norm);
  const double recon_limit = 1e3 * std::max(initial.reconstruction, 1.0);
  const double pred_limit = 1e3 * std::max(initial.prediction_error, 1.0);
  const std::size_t window = 5;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (auto_start && epoch >= config.alpha_ramp_fallback_epoch &&
        *sched.alpha_ramp_start_epoch > epoch)
      sched.alpha_ramp_start_epoch = config.alpha_ramp_fallback_epoch;
    const double alpha = alpha_at(sched, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      auto grad = zero_like(params);
      for (std::size_t i = start; i < end; ++i) {
        const auto g = ae_gradient(model, data[order[i]].z, data[order[i]].t, alpha, config.l_norm);
        for (std::size_t p = 0; p < g.size(); ++p)
          kernels::axpy(1.0, g[p].values(), grad[p].values());
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& pv = params[p].values();
        const auto& gv = grad[p].values();
        auto& a = m1[p].values();
        auto& b = m2[p].values();
        for (std::size_t i = 0; i < pv.size(); ++i) {
          const double gi = gv[i] * scale;
          a[i] = beta1 * a[i] + (1.0 - beta1) * gi;
          b[i] = beta2 * b[i] + (1.0 - beta2) * gi * gi;
          pv[i] -= config.learning_rate * (a[i] / bc1) / (std::sqrt(b[i] / bc2) + eps);
        }
      }
      set_ae_parameters(model, params);
    }

    const Objective o = dataset_objective(model, data, alpha, config.l_norm);
    if (!std::isfinite(o.total) || o.reconstruction > recon_limit || o.prediction_error > pred_limit)
      throw NumericError("autoencoder training diverged at epoch " + std::to_string(epoch) +
                         " (reconstruction " + std::to_string(o.reconstruction) + ", prediction error " +
                         std::to_string(o.prediction_error) + ", alpha " + std::to_string(alpha) +
                         "); try a smaller alpha_max");
    result.loss_history.push_back(o.total);
    result.reconstruction_history.push_back(o.reconstruction);

    // ramp starts once the smoothed reconstruction loss improves by < 1% per epoch
    const auto& h = result.reconstruction_history;
    if (auto_start && *sched.alpha_ramp_start_epoch > epoch && h.size() > window) {
      const double now = std::accumulate(h.end() - window, h.end(), 0.0);
      const double before = std::accumulate(h.end() - window - 1, h.end() - 1, 0.0);
      if (before > 0.0 && (before - now) / before < 0.01) sched.alpha_ramp_start_epoch = epoch + 1;
    }
  }
  result.model = std::move(model);
  result.ramp_start_epoch = *sched.alpha_ramp_start_epoch;
  return result;
}

void save_ae_model(const std::filesystem::path& base, const AeModel& model, json meta) {
  TensorBundle bundle;
  auto add = [&](const std::string& name, const DenseLayer& l) {
    bundle.tensors.push_back({name + ".w", l.w});
    bundle.tensors.push_back({name + ".b", column(l.b)});
  };
  for (std::size_t i = 0; i < model.encoder.size(); ++i) add("enc" + std::to_string(i), model.encoder[i]);
  for (std::size_t i = 0; i < model.decoder.size(); ++i) add("dec" + std::to_string(i), model.decoder[i]);
  add("pred", model.predictor);
  bundle.tensors.push_back({"spectrum_mean", column(model.spectrum_mean)});
  bundle.tensors.push_back({"spectrum_scale", column(model.spectrum_scale)});
  std::vector<std::size_t> sizes;
  for (const auto& l : model.encoder) sizes.push_back(l.w.rows());
  meta["autoencoder"] = {{"input_size", model.input_size()},
                         {"layer_sizes", sizes},
                         {"target_mean", model.target_mean},
                         {"target_scale", model.target_scale}};
  bundle.meta = std::move(meta);
  save_tensors(base, bundle);
}

AeModel load_ae_model(const std::filesystem::path& base) {
  auto bundle = load_tensors(base);
  if (!bundle.meta.contains("autoencoder"))
    throw FormatError(base.string() + ": not an autoencoder checkpoint");
  const json& a = bundle.meta["autoencoder"];
  AeModel model;
  try {
    const auto sizes = a.at("layer_sizes").get<std::vector<std::size_t>>();
    model = make_ae_model(a.at("input_size").get<std::size_t>(), sizes);
    model.target_mean = a.at("target_mean").get<double>();
    model.target_scale = a.at("target_scale").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(base.string() + ": bad autoencoder metadata: " + e.what());
  } catch (const ContractError& e) {
    throw FormatError(base.string() + ": " + e.what());
  }
  const std::size_t n = 2 * (model.encoder.size() + model.decoder.size() + 1);
  if (bundle.tensors.size() != n + 2) throw FormatError(base.string() + ": wrong tensor count");
  std::vector<Matrix> ps;
  for (std::size_t i = 0; i < n; ++i) ps.push_back(bundle.tensors[i].value);
  try {
    set_ae_parameters(model, ps);
  } catch (const ContractError& e) {
    throw FormatError(base.string() + ": " + e.what());
  }
  model.spectrum_mean = bundle.tensors[n].value.values();
  model.spectrum_scale = bundle.tensors[n + 1].value.values();
  if (model.spectrum_mean.size() != model.input_size() ||
      model.spectrum_scale.size() != model.input_size())
    throw FormatError(base.string() + ": standardization tensors have the wrong length");
  return model;
}

void symmetric_eigen(const Matrix& input, Vector& values, Matrix& vectors) {
  require(input.rows() == input.cols(), "eigen-decomposition needs a square matrix");
  const std::size_t n = input.rows();
  Matrix a = input;
  Matrix v = Matrix::identity(n);
  double norm = 0.0;
  for (double x : a.values()) norm += x * x;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-32 * norm || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double kp = a(k, p), kq = a(k, q);
          a(k, p) = c * kp - s * kq;
          a(k, q) = s * kp + c * kq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double pk = a(p, k), qk = a(q, k);
          a(p, k) = c * pk - s * qk;
          a(q, k) = s * pk + c * qk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double kp = v(k, p), kq = v(k, q);
          v(k, p) = c * kp - s * kq;
          v(k, q) = s * kp + c * kq;
        }
      }
    }
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });
  values.resize(n);
  vectors = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    values[r] = a(idx[r], idx[r]);
    for (std::size_t k = 0; k < n; ++k) vectors(r, k) = v(k, idx[r]);
  }
}

Embedding pca_fit(std::span<const Vector> points) {
  require(points.size() >= 2, "PCA needs at least 2 points");
  const std::size_t d = points.front().size();
  require(d >= 1, "PCA points are empty");
  for (const auto& p : points) require(p.size() == d, "PCA points differ in dimension");
  Embedding e;
  e.mean.assign(d, 0.0);
  for (const auto& p : points)
    for (std::size_t i = 0; i < d; ++i) e.mean[i] += p[i];
  for (double& m : e.mean) m /= static_cast<double>(points.size());
  Matrix cov(d, d);
  Vector c(d);
  for (const auto& p : points) {
    for (std::size_t i = 0; i < d; ++i) c[i] = p[i] - e.mean[i];
    kernels::active().ger(1.0, c.data(), c.data(), cov.data(), d, d);
  }
  for (double& x : cov.values()) x /= static_cast<double>(points.size() - 1);

  symmetric_eigen(cov, e.variances, e.axes);
  for (std::size_t r = 0; r < d; ++r) {
    auto row = e.axes.row(r);
    std::size_t big = 0;
    for (std::size_t k = 1; k < d; ++k)
      if (std::abs(row[k]) > std::abs(row[big])) big = k;
    if (row[big] < 0.0)
      for (double& x : row) x = -x;
  }
  double total = 0.0;
  for (double& v : e.variances) {
    v = std::max(v, 0.0);
    total += v;
  }
  e.explained_ratio.assign(d, 0.0);
  if (total > 0.0)
    for (std::size_t i = 0; i < d; ++i) e.explained_ratio[i] = e.variances[i] / total;
  return e;
}

Vector pca_project(const Embedding& embedding, std::span<const double> point, std::size_t k) {
  require(k >= 1, "number of components must be >= 1");
  require(k <= embedding.axes.rows(), "asked for " + std::to_string(k) + " components of " +
                                          std::to_string(embedding.axes.rows()));
  require(point.size() == embedding.mean.size(), "point dimension does not match the embedding");
  Vector c(point.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = point[i] - embedding.mean[i];
  Vector out(k);
  for (std::size_t r = 0; r < k; ++r) out[r] = kernels::dot(embedding.axes.row(r), c);
  return out;
}

std::vector<Vector> pca_project(const Embedding& embedding, std::span<const Vector> points,
                                std::size_t k) {
  std::vector<Vector> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pca_project(embedding, p, k));
  return out;
}

json embedding_to_json(const Embedding& e) {
  json axes = json::array();
  for (std::size_t r = 0; r < e.axes.rows(); ++r)
    axes.push_back(std::vector<double>(e.axes.row(r).begin(), e.axes.row(r).end()));
  return {{"mean", e.mean}, {"axes", axes}, {"variances", e.variances},
          {"explained_ratio", e.explained_ratio}};
}

Embedding embedding_from_json(const json& j) {
  Embedding e;
  try {
    e.mean = j.at("mean").get<Vector>();
    e.variances = j.at("variances").get<Vector>();
    e.explained_ratio = j.at("explained_ratio").get<Vector>();
    const auto rows = j.at("axes").get<std::vector<Vector>>();
    e.axes = Matrix(rows.size(), e.mean.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != e.mean.size()) throw FormatError("embedding axis has the wrong length");
      std::copy(rows[r].begin(), rows[r].end(), e.axes.row(r).begin());
    }
  } catch (const json::exception& ex) {
    throw FormatError(std::string("bad embedding: ") + ex.what());
  }
  return e;
}

}  // namespace lyap
