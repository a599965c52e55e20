#include "lyap/cells.hpp"

#include <cmath>
#include <random>
#include <string>

#include "lyap/error.hpp"
#include "lyap/kernels.hpp"
#include "lyap/rng.hpp"

namespace lyap {

namespace {

// Parameter slots per architecture, in param_layout() order.
namespace slot {
constexpr std::size_t kWih = 0, kWhh = 1, kB = 2, kBhh = 3;          // RNN, LSTM, GRU
constexpr std::size_t kWrec = 0, kWfb = 1, kWin = 2, kWout = 3;      // Rank1RNN
constexpr std::size_t kAsW = 0, kAsV = 1, kAsB = 2;                  // ASRNN
constexpr std::size_t kLinA = 0;                                     // Linear
}  // namespace slot

Matrix column(std::size_t n) { return Matrix(n, 1); }

void gemv_add(const Matrix& a, std::span<const double> x, double* y) {
  Vector tmp(a.rows());
  kernels::active().gemv(a.data(), a.rows(), a.cols(), x.data(), tmp.data());
  for (std::size_t i = 0; i < tmp.size(); ++i) y[i] += tmp[i];
}

}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::VanillaRNN: return "rnn";
    case Architecture::LSTM: return "lstm";
    case Architecture::GRU: return "gru";
    case Architecture::Rank1RNN: return "rank1";
    case Architecture::ASRNN: return "asrnn";
    case Architecture::Linear: return "linear";
  }
  return "unknown";
}

std::optional<Architecture> parse_architecture(std::string_view name) {
  if (name == "rnn") return Architecture::VanillaRNN;
  if (name == "lstm") return Architecture::LSTM;
  if (name == "gru") return Architecture::GRU;
  if (name == "rank1") return Architecture::Rank1RNN;
  if (name == "asrnn") return Architecture::ASRNN;
  return std::nullopt;
}

void CellSpec::validate() const {
  require(hidden_size >= 1, "hidden_size must be >= 1");
  require(input_size >= 1, "input_size must be >= 1");
  require(std::isfinite(init_param) && init_param > 0.0, "init_param must be finite and > 0");
  if (architecture == Architecture::Rank1RNN) {
    require(hidden_size >= 2, "Rank1RNN needs at least 2 units");
    require(dt > 0.0 && dt <= 1.0, "Rank1RNN dt must lie in (0, 1]");
  }
}

std::size_t CellSpec::state_dim() const {
  return architecture == Architecture::LSTM ? 2 * hidden_size : hidden_size;
}

std::vector<Param> param_layout(const CellSpec& spec) {
  const std::size_t h = spec.hidden_size, in = spec.input_size;
  switch (spec.architecture) {
    case Architecture::VanillaRNN:
      return {{"W_ih", Matrix(h, in)}, {"W_hh", Matrix(h, h)}, {"b", column(h)}};
    case Architecture::LSTM:
      return {{"W_ih", Matrix(4 * h, in)}, {"W_hh", Matrix(4 * h, h)}, {"b", column(4 * h)}};
    case Architecture::GRU:
      return {{"W_ih", Matrix(3 * h, in)},
              {"W_hh", Matrix(3 * h, h)},
              {"b_ih", column(3 * h)},
              {"b_hh", column(3 * h)}};
    case Architecture::Rank1RNN:
      return {{"W_rec", Matrix(h, h)}, {"w_fb", column(h)}, {"w_in", Matrix(h, in)},
              {"w_out", column(h)}};
    case Architecture::ASRNN:
      return {{"W", Matrix(h, h)}, {"V", Matrix(h, in)}, {"b", column(h)}};
    case Architecture::Linear:
      return {{"A", Matrix(h, h)}, {"B", Matrix(h, in)}};
  }
  return {};
}

Cell::Cell(CellSpec spec, std::vector<Param> params) : spec_(spec), params_(std::move(params)) {
  spec_.validate();
  const auto layout = param_layout(spec_);
  require(layout.size() == params_.size(), "parameter count does not match architecture");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    require(layout[i].name == params_[i].name,
            "parameter " + std::to_string(i) + " should be " + layout[i].name);
    require(layout[i].value.rows() == params_[i].value.rows() &&
                layout[i].value.cols() == params_[i].value.cols(),
            "parameter " + layout[i].name + " has the wrong shape");
  }
}

const Matrix& Cell::param(std::string_view name) const {
  for (const auto& prm : params_)
    if (prm.name == name) return prm.value;
  throw ContractError("no parameter named " + std::string(name));
}

Cell Cell::with_param(std::string_view name, Matrix value) const {
  auto params = params_;
  for (auto& prm : params)
    if (prm.name == name) {
      prm.value = std::move(value);
      return Cell(spec_, std::move(params));
    }
  throw ContractError("no parameter named " + std::string(name));
}

Cell init_cell(const CellSpec& spec) {
  spec.validate();
  auto params = param_layout(spec);
  Rng rng(spec.seed);
  if (spec.architecture == Architecture::Rank1RNN) {
    const double n = static_cast<double>(spec.hidden_size);
    std::normal_distribution<double> rec(0.0, spec.init_param / std::sqrt(n));
    std::uniform_real_distribution<double> fb(-1.0, 1.0);
    std::normal_distribution<double> in(0.0, 1.0);
    for (double& w : params[slot::kWrec].value.values()) w = rec(rng);
    for (double& w : params[slot::kWfb].value.values()) w = fb(rng);
    for (double& w : params[slot::kWin].value.values()) w = in(rng);
    // Readout starts at zero; FORCE trains it.
    return Cell(spec, std::move(params));
  }
  std::uniform_real_distribution<double> u(-spec.init_param, spec.init_param);
  for (auto& prm : params)
    for (double& w : prm.value.values()) w = u(rng);
  return Cell(spec, std::move(params));
}

Cell make_linear_cell(const Matrix& a, std::size_t input_size) {
  require(a.rows() == a.cols() && a.rows() >= 1, "linear cell needs a square matrix");
  CellSpec spec;
  spec.architecture = Architecture::Linear;
  spec.hidden_size = a.rows();
  spec.input_size = input_size;
  spec.init_param = 1.0;
  return Cell(spec, {{"A", a}, {"B", Matrix(a.rows(), input_size)}});
}

void Cell::check_dims(std::span<const double> state, std::span<const double> input) const {
  require(state.size() == state_dim(), "state has dimension " + std::to_string(state.size()) +
                                           ", cell expects " + std::to_string(state_dim()));
  require(input.size() == spec_.input_size, "input has dimension " +
                                                std::to_string(input.size()) + ", cell expects " +
                                                std::to_string(spec_.input_size));
}

double Cell::readout(std::span<const double> state) const {
  if (spec_.architecture != Architecture::Rank1RNN) return 0.0;
  const Matrix& w = p(slot::kWout);
  double z = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) z += w.data()[i] * std::tanh(state[i]);
  return z;
}

Vector Cell::step(std::span<const double> state, std::span<const double> input) const {
  check_dims(state, input);
  const std::size_t h = spec_.hidden_size;
  switch (spec_.architecture) {
    case Architecture::VanillaRNN: {
      Vector a(p(slot::kB).values());
      gemv_add(p(slot::kWih), input, a.data());
      gemv_add(p(slot::kWhh), state, a.data());
      for (double& v : a) v = std::tanh(v);
      return a;
    }
    case Architecture::LSTM: {
      Vector pre(p(slot::kB).values());
      gemv_add(p(slot::kWih), input, pre.data());
      gemv_add(p(slot::kWhh), state.first(h), pre.data());
      Vector next(2 * h);
      for (std::size_t j = 0; j < h; ++j) {
        const double ig = sigmoid(pre[j]);
        const double fg = sigmoid(pre[h + j]);
        const double gg = std::tanh(pre[2 * h + j]);
        const double og = sigmoid(pre[3 * h + j]);
        const double c = fg * state[h + j] + ig * gg;
        next[h + j] = c;
        next[j] = og * std::tanh(c);
      }
      return next;
    }
    case Architecture::GRU: {
      Vector gi(p(slot::kB).values());
      Vector gh(p(slot::kBhh).values());
      gemv_add(p(slot::kWih), input, gi.data());
      gemv_add(p(slot::kWhh), state, gh.data());
      Vector next(h);
      for (std::size_t j = 0; j < h; ++j) {
        const double r = sigmoid(gi[j] + gh[j]);
        const double z = sigmoid(gi[h + j] + gh[h + j]);
        const double n = std::tanh(gi[2 * h + j] + r * gh[2 * h + j]);
        next[j] = (1.0 - z) * n + z * state[j];
      }
      return next;
    }
    case Architecture::Rank1RNN: {
      Vector phi(h);
      for (std::size_t j = 0; j < h; ++j) phi[j] = std::tanh(state[j]);
      const double z = kernels::active().dot(p(slot::kWout).data(), phi.data(), h);
      Vector drive(h, 0.0);
      gemv_add(p(slot::kWrec), phi, drive.data());
      gemv_add(p(slot::kWin), input, drive.data());
      const double* wfb = p(slot::kWfb).data();
      const double dt = spec_.dt;
      Vector next(h);
      for (std::size_t j = 0; j < h; ++j)
        next[j] = state[j] + dt * (-state[j] + drive[j] + wfb[j] * z);
      return next;
    }
    case Architecture::ASRNN: {
      Vector a(p(slot::kAsB).values());
      gemv_add(p(slot::kAsV), input, a.data());
      const Matrix& w = p(slot::kAsW);
      for (std::size_t j = 0; j < h; ++j) {
        double s = -spec_.asrnn_gamma * state[j];
        for (std::size_t k = 0; k < h; ++k) s += (w(j, k) - w(k, j)) * state[k];
        a[j] += s;
      }
      Vector next(h);
      for (std::size_t j = 0; j < h; ++j) next[j] = state[j] + spec_.asrnn_eps * std::tanh(a[j]);
      return next;
    }
    case Architecture::Linear: {
      Vector next(h, 0.0);
      gemv_add(p(slot::kLinA), state, next.data());
      gemv_add(p(1), input, next.data());
      return next;
    }
  }
  throw ContractError("unknown architecture");
}

Matrix Cell::tangent_map(std::span<const double> state, std::span<const double> input) const {
  check_dims(state, input);
  const std::size_t h = spec_.hidden_size;
  switch (spec_.architecture) {
    case Architecture::VanillaRNN: {
      const Vector next = step(state, input);
      Matrix t = p(slot::kWhh);
      for (std::size_t j = 0; j < h; ++j) kernels::scale(1.0 - next[j] * next[j], t.row(j));
      return t;
    }
    case Architecture::LSTM: {
      const Matrix& whh = p(slot::kWhh);
      Vector pre(p(slot::kB).values());
      gemv_add(p(slot::kWih), input, pre.data());
      gemv_add(whh, state.first(h), pre.data());
      Matrix t(2 * h, 2 * h);
      Vector dc(h);
      for (std::size_t j = 0; j < h; ++j) {
        const double ig = sigmoid(pre[j]);
        const double fg = sigmoid(pre[h + j]);
        const double gg = std::tanh(pre[2 * h + j]);
        const double og = sigmoid(pre[3 * h + j]);
        const double c = fg * state[h + j] + ig * gg;
        const double tc = std::tanh(c);
        const double dcf = state[h + j] * fg * (1.0 - fg);
        const double dci = gg * ig * (1.0 - ig);
        const double dcg = ig * (1.0 - gg * gg);
        const double dho = og * (1.0 - og) * tc;
        const double dhc = og * (1.0 - tc * tc);
        auto crow = t.row(h + j);
        auto hrow = t.row(j);
        for (std::size_t k = 0; k < h; ++k) {
          const double d = dcf * whh(h + j, k) + dci * whh(j, k) + dcg * whh(2 * h + j, k);
          crow[k] = d;
          hrow[k] = dho * whh(3 * h + j, k) + dhc * d;
        }
        crow[h + j] = fg;
        hrow[h + j] = dhc * fg;
      }
      return t;
    }
    case Architecture::GRU: {
      const Matrix& whh = p(slot::kWhh);
      Vector gi(p(slot::kB).values());
      Vector gh(p(slot::kBhh).values());
      gemv_add(p(slot::kWih), input, gi.data());
      gemv_add(whh, state, gh.data());
      Matrix t(h, h);
      for (std::size_t j = 0; j < h; ++j) {
        const double r = sigmoid(gi[j] + gh[j]);
        const double z = sigmoid(gi[h + j] + gh[h + j]);
        const double n = std::tanh(gi[2 * h + j] + r * gh[2 * h + j]);
        const double dn = (1.0 - z) * (1.0 - n * n);
        const double a_n = dn * r;
        const double a_r = dn * gh[2 * h + j] * r * (1.0 - r);
        const double a_z = (state[j] - n) * z * (1.0 - z);
        auto row = t.row(j);
        for (std::size_t k = 0; k < h; ++k)
          row[k] = a_n * whh(2 * h + j, k) + a_r * whh(j, k) + a_z * whh(h + j, k);
        row[j] += z;
      }
      return t;
    }
    case Architecture::Rank1RNN: {
      const Matrix& w = p(slot::kWrec);
      const double* wfb = p(slot::kWfb).data();
      const double* wout = p(slot::kWout).data();
      const double dt = spec_.dt;
      Vector dphi(h);
      for (std::size_t k = 0; k < h; ++k) {
        const double ph = std::tanh(state[k]);
        dphi[k] = dt * (1.0 - ph * ph);
      }
      Matrix t(h, h);
      for (std::size_t j = 0; j < h; ++j) {
        auto row = t.row(j);
        const auto wr = w.row(j);
        for (std::size_t k = 0; k < h; ++k) row[k] = (wr[k] + wfb[j] * wout[k]) * dphi[k];
        row[j] += 1.0 - dt;
      }
      return t;
    }
    case Architecture::ASRNN: {
      const Matrix& w = p(slot::kAsW);
      Matrix m(h, h);
      for (std::size_t j = 0; j < h; ++j)
        for (std::size_t k = 0; k < h; ++k) m(j, k) = w(j, k) - w(k, j);
      for (std::size_t j = 0; j < h; ++j) m(j, j) -= spec_.asrnn_gamma;
      Vector a(p(slot::kAsB).values());
      gemv_add(p(slot::kAsV), input, a.data());
      gemv_add(m, state, a.data());
      for (std::size_t j = 0; j < h; ++j) {
        const double th = std::tanh(a[j]);
        kernels::scale(spec_.asrnn_eps * (1.0 - th * th), m.row(j));
        m(j, j) += 1.0;
      }
      return m;
    }
    case Architecture::Linear:
      return p(slot::kLinA);
  }
  throw ContractError("unknown architecture");
}

Matrix Cell::jacobian(std::span<const double> state, std::span<const double> input) const {
  return tangent_map(state, input).transposed();
}

}  // namespace lyap
