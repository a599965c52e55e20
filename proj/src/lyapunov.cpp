#include "lyap/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lyap/error.hpp"
#include "lyap/kernels.hpp"
#include "lyap/parallel.hpp"

namespace lyap {

std::string_view task_name(Task t) {
  switch (t) {
    case Task::TargetLearning: return "target-learning";
    case Task::CharPrediction: return "char-rnn";
    case Task::SMNIST: return "smnist";
    case Task::Synthetic: return "synthetic";
  }
  return "unknown";
}

std::optional<Task> parse_task(std::string_view name) {
  if (name == "target-learning") return Task::TargetLearning;
  if (name == "char-rnn") return Task::CharPrediction;
  if (name == "smnist") return Task::SMNIST;
  if (name == "synthetic") return Task::Synthetic;
  return std::nullopt;
}

void LEConfig::validate(std::size_t d) const {
  require(seq_len >= 1, "LE seq_len must be >= 1");
  require(n_inputs >= 1, "LE n_inputs must be >= 1");
  const std::size_t k = exponents_for(d);
  require(k >= 1 && k <= d, "k_exponents must lie in [1, " + std::to_string(d) + "]");
}

void orthonormalize(Matrix& frame, Vector& r_diag) {
  const auto& kt = kernels::active();
  const std::size_t k = frame.rows(), d = frame.cols();
  require(k <= d, "cannot orthonormalize more vectors than the dimension");
  r_diag.assign(k, 0.0);
  // Householder vectors, v_c lives in entries [c, d) of reflectors.row(c).
  Matrix reflectors(k, d);
  for (std::size_t c = 0; c < k; ++c) {
    double* col = frame.row(c).data() + c;
    const std::size_t len = d - c;
    const double alpha = std::sqrt(kt.dot(col, col, len));
    double* v = reflectors.row(c).data() + c;
    if (alpha == 0.0) continue;
    const double sign = col[0] >= 0.0 ? 1.0 : -1.0;
    std::copy(col, col + len, v);
    v[0] += sign * alpha;
    const double vnorm = std::sqrt(kt.dot(v, v, len));
    kt.scale(1.0 / vnorm, v, len);
    r_diag[c] = -sign * alpha;
    for (std::size_t c2 = c + 1; c2 < k; ++c2) {
      double* other = frame.row(c2).data() + c;
      kt.axpy(-2.0 * kt.dot(v, other, len), v, other, len);
    }
  }
  // Thin Q = H_0 ... H_{k-1} applied to the leading identity columns.
  frame.fill(0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double* y = frame.row(j).data();
    y[j] = 1.0;
    for (std::size_t c = std::min(j + 1, k); c-- > 0;) {
      const double* v = reflectors.row(c).data() + c;
      const std::size_t len = d - c;
      kt.axpy(-2.0 * kt.dot(v, y + c, len), v, y + c, len);
    }
    if (r_diag[j] < 0.0) {
      r_diag[j] = -r_diag[j];
      kt.scale(-1.0, y, d);
    }
  }
}

SequenceResult sequence_exponents(const Cell& cell, const InputSequence& inputs,
                                  const LEConfig& config, const SequenceOptions& options) {
  const std::size_t d = cell.state_dim();
  config.validate(d);
  const std::size_t k = config.exponents_for(d);
  const std::size_t total = config.warmup + config.seq_len;
  require(inputs.rows() >= total, "input sequence has " + std::to_string(inputs.rows()) +
                                      " steps, need warmup + T = " + std::to_string(total));
  require(inputs.cols() == cell.input_size(), "input width does not match the cell");

  Matrix frame(k, d);
  if (options.initial_frame != nullptr) {
    require(options.initial_frame->rows() == k && options.initial_frame->cols() == d,
            "initial frame must be k x D");
    frame = *options.initial_frame;
  } else {
    for (std::size_t c = 0; c < k; ++c) frame(c, c) = 1.0;
  }

  const auto& kt = kernels::active();
  Vector state(d, 0.0);
  Vector r_diag;
  Matrix pushed(k, d);
  SequenceResult result{Vector(k, 0.0), false};
  const double log_floor = std::log(kMinExpansion);

  for (std::size_t t = 0; t < total; ++t) {
    const auto input = inputs.row(t);
    const Matrix tangent = cell.tangent_map(state, input);
    for (std::size_t c = 0; c < k; ++c)
      kt.gemv(tangent.data(), d, d, frame.row(c).data(), pushed.row(c).data());
    std::swap(frame, pushed);
    orthonormalize(frame, r_diag);
    if (options.observer) options.observer(t, frame, r_diag);

    state = cell.step(state, input);
    for (double v : state)
      if (!std::isfinite(v))
        throw NumericError("non-finite state at step " + std::to_string(t) + " of variant '" +
                           options.variant_id + "'");

    if (t < config.warmup) continue;
    for (std::size_t c = 0; c < k; ++c) {
      if (r_diag[c] < kMinExpansion) {
        result.exponents[c] += log_floor;
        result.degenerate = true;
      } else {
        result.exponents[c] += std::log(r_diag[c]);
      }
    }
  }
  const double inv_t = 1.0 / static_cast<double>(config.seq_len);
  for (double& e : result.exponents) e *= inv_t;
  return result;
}

SpectrumRecord compute_le(const Cell& cell, std::span<const InputSequence> inputs,
                          const LEConfig& config, const LERunOptions& options) {
  config.validate(cell.state_dim());
  require(inputs.size() == config.n_inputs, "expected " + std::to_string(config.n_inputs) +
                                                " input sequences, got " +
                                                std::to_string(inputs.size()));
  std::vector<SequenceResult> runs(inputs.size());
  parallel_for(inputs.size(), options.threads, [&](std::size_t i) {
    SequenceOptions so;
    so.variant_id = options.variant_id;
    runs[i] = sequence_exponents(cell, inputs[i], config, so);
  });

  const std::size_t k = config.exponents_for(cell.state_dim());
  SpectrumRecord rec;
  rec.values.assign(k, 0.0);
  for (const auto& run : runs) {
    for (std::size_t c = 0; c < k; ++c) rec.values[c] += run.exponents[c];
    rec.degenerate = rec.degenerate || run.degenerate;
  }
  for (double& v : rec.values) v /= static_cast<double>(runs.size());
  std::sort(rec.values.begin(), rec.values.end(), std::greater<>());

  rec.variant_id = options.variant_id;
  rec.architecture = cell.spec().architecture;
  rec.hidden_size = cell.hidden_size();
  rec.init_param = cell.spec().init_param;
  return rec;
}

Vector interpolate_spectrum(std::span<const double> values, std::size_t target_len) {
  require(values.size() >= 2, "interpolation needs at least 2 exponents");
  require(target_len >= 2, "interpolation target length must be >= 2");
  if (target_len == values.size()) return Vector(values.begin(), values.end());
  const double src_last = static_cast<double>(values.size() - 1);
  const double dst_last = static_cast<double>(target_len - 1);
  Vector out(target_len);
  out.front() = values.front();
  out.back() = values.back();
  for (std::size_t i = 1; i + 1 < target_len; ++i) {
    const double pos = static_cast<double>(i) * src_last / dst_last;
    const auto lo = std::min(static_cast<std::size_t>(pos), values.size() - 2);
    const double frac = pos - static_cast<double>(lo);
    out[i] = values[lo] + frac * (values[lo + 1] - values[lo]);
  }
  return out;
}

SpectrumStats spectrum_stats(std::span<const double> values) {
  require(!values.empty(), "spectrum statistics of an empty spectrum");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, *std::max_element(values.begin(), values.end()), ss / n};
}

}  // namespace lyap
