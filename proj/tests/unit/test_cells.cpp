#include <cmath>
#include <random>

#include "doctest.h"
#include "lyap/cells.hpp"
#include "test_support.hpp"

using namespace lyap;

namespace {

CellSpec make_spec(Architecture a, std::size_t h, std::size_t in, double p, std::uint64_t seed) {
  CellSpec s;
  s.architecture = a;
  s.hidden_size = h;
  s.input_size = in;
  s.init_param = p;
  s.seed = seed;
  return s;
}

// Gated nets get a larger init so the derivative terms are not all tiny.
Cell random_cell(Architecture a, std::uint64_t seed) {
  const double p = a == Architecture::Rank1RNN ? 1.5 : (a == Architecture::ASRNN ? 1.0 : 0.6);
  return init_cell(make_spec(a, 6, 3, p, seed));
}

}  // namespace

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(make_spec(Architecture::LSTM, 0, 1, 0.1, 0).validate(), ContractError);
  CHECK_THROWS_AS(make_spec(Architecture::LSTM, 4, 0, 0.1, 0).validate(), ContractError);
  CHECK_THROWS_AS(make_spec(Architecture::LSTM, 4, 1, 0.0, 0).validate(), ContractError);
  CHECK_NOTHROW(make_spec(Architecture::LSTM, 4, 1, 0.1, 0).validate());
  CHECK(make_spec(Architecture::LSTM, 4, 1, 0.1, 0).state_dim() == 8);
  CHECK(make_spec(Architecture::GRU, 4, 1, 0.1, 0).state_dim() == 4);
}

TEST_CASE("architecture names round-trip, linear is not public") {
  for (auto a : {Architecture::VanillaRNN, Architecture::LSTM, Architecture::GRU,
                 Architecture::Rank1RNN, Architecture::ASRNN})
    CHECK(parse_architecture(architecture_name(a)) == a);
  CHECK_FALSE(parse_architecture("linear").has_value());
}

TEST_CASE("uniform init respects the half-width") {
  for (auto a : {Architecture::VanillaRNN, Architecture::LSTM, Architecture::GRU,
                 Architecture::ASRNN}) {
    const Cell c = init_cell(make_spec(a, 8, 3, 1e-9, 11));
    for (const auto& prm : c.params())
      for (double w : prm.value.values()) {
        CHECK(w >= -1e-9);
        CHECK(w <= 1e-9);
      }
  }
}

TEST_CASE("rank-1 recurrent entries have variance g^2/N") {
  const Cell c = init_cell(make_spec(Architecture::Rank1RNN, 300, 1, 1.5, 3));
  const auto& w = c.param("W_rec").values();
  REQUIRE(w.size() >= 10000);
  double mean = 0.0;
  for (double x : w) mean += x;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double x : w) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w.size());
  const double expected = 1.5 * 1.5 / 300.0;
  CHECK(std::abs(var - expected) / expected < 0.2);
  for (double x : c.param("w_out").values()) CHECK(x == 0.0);
}

TEST_CASE("initialization is deterministic in (spec, seed)") {
  for (auto a : {Architecture::VanillaRNN, Architecture::LSTM, Architecture::GRU,
                 Architecture::Rank1RNN, Architecture::ASRNN}) {
    const auto spec = make_spec(a, 5, 2, 0.3, 99);
    CHECK(init_cell(spec) == init_cell(spec));
    auto other = spec;
    other.seed = 100;
    CHECK_FALSE(init_cell(spec) == init_cell(other));
  }
}

TEST_CASE("zero-parameter cells") {
  SUBCASE("vanilla RNN maps everything to zero") {
    const Cell c = testing::zero_cell(make_spec(Architecture::VanillaRNN, 4, 2, 0.1, 0));
    const Vector next = c.step(Vector{0.3, -2.0, 1.0, 5.0}, Vector{1.0, -1.0});
    for (double v : next) CHECK(v == 0.0);
    const Matrix j = c.jacobian(Vector{0.3, -2.0, 1.0, 5.0}, Vector{1.0, -1.0});
    for (double v : j.values()) CHECK(v == 0.0);
  }
  SUBCASE("LSTM origin is a fixed point") {
    const Cell c = testing::zero_cell(make_spec(Architecture::LSTM, 3, 2, 0.1, 0));
    const Vector next = c.step(Vector(6, 0.0), Vector{0.5, 0.5});
    for (double v : next) CHECK(v == 0.0);
  }
  SUBCASE("rank-1 origin is an equilibrium") {
    const Cell c = testing::zero_cell(make_spec(Architecture::Rank1RNN, 4, 1, 1.0, 0));
    const Vector next = c.step(Vector(4, 0.0), Vector{0.0});
    for (double v : next) CHECK(v == 0.0);
  }
}

TEST_CASE("rank-1 Euler step with no coupling decays at rate dt") {
  const Cell c = testing::zero_cell(make_spec(Architecture::Rank1RNN, 3, 1, 1.0, 0));
  const Vector next = c.step(Vector{1.0, -2.0, 0.5}, Vector{0.0});
  CHECK(next[0] == doctest::Approx(0.9));
  CHECK(next[1] == doctest::Approx(-1.8));
  CHECK(next[2] == doctest::Approx(0.45));
}

TEST_CASE("analytical Jacobians match central finite differences") {
  for (auto a : {Architecture::VanillaRNN, Architecture::LSTM, Architecture::GRU,
                 Architecture::Rank1RNN, Architecture::ASRNN}) {
    CAPTURE(architecture_name(a));
    Cell cell = random_cell(a, 5);
    if (a == Architecture::Rank1RNN) {
      // Non-zero readout so the feedback loop enters the Jacobian.
      std::mt19937_64 r(1);
      cell = cell.with_param("w_out", testing::random_matrix(6, 1, r, 0.5));
    }
    std::mt19937_64 rng(42);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Vector state = testing::random_vector(cell.state_dim(), rng, 1.0);
      const Vector input = testing::random_vector(cell.input_size(), rng, 1.0);
      const Matrix analytic = cell.jacobian(state, input);
      const Matrix numeric = testing::fd_jacobian(
          [&](const Vector& s) { return cell.step(s, input); }, state, 1e-5);
      worst = std::max(worst, testing::max_rel_error(analytic, numeric));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("linear cell Jacobian is the transpose of its matrix") {
  Matrix a(2, 2);
  a.values() = {1.0, 2.0, 3.0, 4.0};
  const Cell c = make_linear_cell(a);
  const Vector h{0.7, -0.1};
  const Vector next = c.step(h, Vector{0.0});
  CHECK(next[0] == doctest::Approx(0.7 - 0.2));
  CHECK(next[1] == doctest::Approx(2.1 - 0.4));
  // J(i, j) = d next_j / d h_i = A(j, i)
  CHECK(c.jacobian(h, Vector{0.0}) == a.transposed());
  CHECK(c.jacobian(Vector{5.0, 5.0}, Vector{1.0}) == a.transposed());
  CHECK(c.tangent_map(h, Vector{0.0}) == a);
}

TEST_CASE("gated hidden states stay in [-1, 1]") {
  std::mt19937_64 rng(9);
  for (auto a : {Architecture::LSTM, Architecture::GRU}) {
    const Cell c = init_cell(make_spec(a, 8, 2, 2.0, 4));
    Vector s(c.state_dim(), 0.0);
    for (int t = 0; t < 200; ++t) {
      s = c.step(s, testing::random_vector(2, rng, 5.0));
      for (std::size_t j = 0; j < c.hidden_size(); ++j) CHECK(std::abs(s[j]) <= 1.0);
    }
  }
}

TEST_CASE("dimension mismatch is a contract violation") {
  const Cell c = init_cell(make_spec(Architecture::GRU, 4, 2, 0.1, 0));
  CHECK_THROWS_AS(c.step(Vector(3, 0.0), Vector(2, 0.0)), ContractError);
  CHECK_THROWS_AS(c.step(Vector(4, 0.0), Vector(3, 0.0)), ContractError);
  CHECK_THROWS_AS(c.jacobian(Vector(5, 0.0), Vector(2, 0.0)), ContractError);
}

TEST_CASE("cell construction rejects foreign parameter shapes") {
  auto spec = make_spec(Architecture::VanillaRNN, 4, 2, 0.1, 0);
  auto params = param_layout(spec);
  params[1].value = Matrix(3, 3);
  CHECK_THROWS_AS(Cell(spec, params), ContractError);
}
