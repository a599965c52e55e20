#include "lyap/force.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lyap/error.hpp"
#include "lyap/kernels.hpp"
#include "lyap/rng.hpp"
#include "lyap/serialize.hpp"

namespace lyap {

namespace {

constexpr double kDivergenceBound = 1e6;

}  // namespace

void ForceConfig::validate() const {
  require(N >= 2, "FORCE needs N >= 2");
  require(g > 0.0, "FORCE gain g must be > 0");
  require(dt > 0.0 && dt <= 1.0, "FORCE dt must lie in (0, 1]");
  require(rls_delta > 0.0, "RLS delta must be > 0");
  require(update_stride >= 1, "update_stride must be >= 1");
  require(test_steps >= 1, "test_steps must be >= 1");
  for (double f : checkpoint_fractions)
    require(f >= 0.0 && f <= 1.0, "checkpoint fractions must lie in [0, 1]");
}

CellSpec rank1_spec(const ForceConfig& config, std::uint64_t seed) {
  CellSpec s;
  s.architecture = Architecture::Rank1RNN;
  s.hidden_size = config.N;
  s.input_size = 1;
  s.init_param = config.g;
  s.dt = config.dt;
  s.seed = seed;
  return s;
}

ForceResult force_train(const Cell& cell, const ForceConfig& config, std::span<const double> target,
                        std::uint64_t state_seed) {
  config.validate();
  require(cell.spec().architecture == Architecture::Rank1RNN, "FORCE trains Rank1RNN cells");
  require(target.size() >= config.train_steps + config.test_steps,
          "target shorter than train_steps + test_steps");
  const std::size_t n = cell.hidden_size();
  const double dt = cell.spec().dt;
  const auto& kt = kernels::active();
  const Matrix& w_rec = cell.param("W_rec");
  const double* w_fb = cell.param("w_fb").data();
  Vector w(cell.param("w_out").values());

  Rng rng(state_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(n);
  for (double& v : x) v = config.initial_state_scale * normal(rng);
  Vector r(n), drive(n), pr(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = std::tanh(x[i]);
  double z = kt.dot(w.data(), r.data(), n);

  // Inverse correlation matrix estimate.
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i) p(i, i) = 1.0 / config.rls_delta;

  auto with_readout = [&](const Vector& readout) {
    Matrix m(n, 1);
    m.values() = readout;
    return cell.with_param("w_out", std::move(m));
  };

  ForceResult result{cell, 0.0, false, {}, {}};
  auto fractions = config.checkpoint_fractions;
  std::sort(fractions.begin(), fractions.end());
  std::size_t next_ckpt = 0;
  auto snapshot = [&](std::size_t done) {
    while (next_ckpt < fractions.size() &&
           static_cast<double>(done) >=
               fractions[next_ckpt] * static_cast<double>(config.train_steps)) {
      result.checkpoints.push_back({fractions[next_ckpt], with_readout(w)});
      ++next_ckpt;
    }
  };

  auto advance = [&]() -> bool {
    kt.gemv(w_rec.data(), n, n, r.data(), drive.data());
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += dt * (-x[i] + drive[i] + w_fb[i] * z);
      if (!(std::abs(x[i]) <= kDivergenceBound)) return false;
      r[i] = std::tanh(x[i]);
    }
    z = kt.dot(w.data(), r.data(), n);
    return true;
  };

  snapshot(0);
  for (std::size_t t = 0; t < config.train_steps; ++t) {
    if (!advance()) {
      result.failed = true;
      break;
    }
    if (t % config.update_stride == 0) {
      kt.gemv(p.data(), n, n, r.data(), pr.data());
      const double c = 1.0 / (1.0 + kt.dot(r.data(), pr.data(), n));
      kt.ger(-c, pr.data(), pr.data(), p.data(), n, n);
      const double err = z - target[t];
      kt.axpy(-err * c, pr.data(), w.data(), n);
    }
    snapshot(t + 1);
  }

  double se = 0.0, st = 0.0;
  if (!result.failed) {
    result.test_output.reserve(config.test_steps);
    for (std::size_t t = 0; t < config.test_steps; ++t) {
      if (!advance()) {
        result.failed = true;
        break;
      }
      const double f = target[config.train_steps + t];
      result.test_output.push_back(z);
      se += (z - f) * (z - f);
      st += f * f;
    }
  }
  result.cell = with_readout(w);
  if (result.failed) {
    // Snapshots past the blow-up point keep the last readout reached.
    while (next_ckpt < fractions.size())
      result.checkpoints.push_back({fractions[next_ckpt++], result.cell});
    result.test_error = kLossCap;
    return result;
  }
  result.test_error = st > 0.0 ? std::sqrt(se / st) : std::sqrt(se / config.test_steps);
  if (!std::isfinite(result.test_error)) {
    result.failed = true;
    result.test_error = kLossCap;
  }
  return result;
}

}  // namespace lyap
