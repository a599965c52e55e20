#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "lyap/supervised.hpp"
#include "test_support.hpp"

using namespace lyap;

namespace {

CellSpec spec_for(Architecture a, std::size_t h, std::size_t in, double p, std::uint64_t seed) {
  CellSpec s;
  s.architecture = a;
  s.hidden_size = h;
  s.input_size = in;
  s.init_param = p;
  s.seed = seed;
  return s;
}

ClassificationSet random_set(std::size_t n, std::size_t steps, std::size_t in, std::size_t classes,
                             std::mt19937_64& rng, int fixed_label = -1) {
  ClassificationSet d;
  d.input_size = in;
  d.num_classes = classes;
  std::uniform_int_distribution<int> lab(0, static_cast<int>(classes) - 1);
  for (std::size_t i = 0; i < n; ++i) {
    d.dense.push_back(testing::random_matrix(steps, in, rng));
    d.labels.push_back(fixed_label >= 0 ? fixed_label : lab(rng));
  }
  return d;
}

// Plain recomputation from Cell::step and a textbook softmax.
double naive_ce(const SequenceModel& m, const Matrix& x, int label) {
  Vector s(m.cell.state_dim(), 0.0);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const auto row = x.row(t);
    s = m.cell.step(s, Vector(row.begin(), row.end()));
  }
  const std::size_t h = m.cell.hidden_size();
  Vector z(m.num_classes());
  for (std::size_t c = 0; c < z.size(); ++c) {
    z[c] = m.out_b[c];
    for (std::size_t j = 0; j < h; ++j) z[c] += m.out_w(c, j) * s[j];
  }
  double denom = 0.0;
  for (double v : z) denom += std::exp(v);
  return std::log(denom) - z[static_cast<std::size_t>(label)];
}

}  // namespace

TEST_CASE("BPTT gradients match finite differences") {
  for (auto arch : {Architecture::VanillaRNN, Architecture::LSTM, Architecture::GRU}) {
    CAPTURE(architecture_name(arch));
    std::mt19937_64 rng(17);
    const SequenceModel model = init_sequence_model(spec_for(arch, 4, 3, 0.5, 21), 3);
    const Matrix x = testing::random_matrix(5, 3, rng);
    const int label = 1;
    ModelGradient grad;
    example_loss_and_gradient(model, x, label, &grad);

    auto params = flatten_model(model);
    const double eps = 1e-6;
    for (std::size_t k = 0; k < params.size(); ++k) {
      Matrix fd(params[k].rows(), params[k].cols());
      for (std::size_t i = 0; i < params[k].size(); ++i) {
        auto plus = params, minus = params;
        plus[k].values()[i] += eps;
        minus[k].values()[i] -= eps;
        const double lp = naive_ce(unflatten_model(model.cell.spec(), plus), x, label);
        const double lm = naive_ce(unflatten_model(model.cell.spec(), minus), x, label);
        fd.values()[i] = (lp - lm) / (2.0 * eps);
      }
      CAPTURE(k);
      CHECK(testing::max_rel_error(grad.tensors[k], fd) < 1e-3);
    }
  }
}

TEST_CASE("training forward agrees with iterated Cell::step") {
  std::mt19937_64 rng(3);
  for (auto arch : {Architecture::VanillaRNN, Architecture::LSTM, Architecture::GRU}) {
    const SequenceModel model = init_sequence_model(spec_for(arch, 6, 2, 0.4, 8), 4);
    const Matrix x = testing::random_matrix(7, 2, rng);
    for (int label = 0; label < 4; ++label)
      CHECK(std::abs(example_loss_and_gradient(model, x, label, nullptr) - naive_ce(model, x, label)) <
            1e-12);
  }
}

TEST_CASE("untrained cross-entropy is near ln(C)") {
  std::mt19937_64 rng(11);
  const auto data = random_set(200, 10, 5, 10, rng);
  const SequenceModel model = init_sequence_model(spec_for(Architecture::LSTM, 32, 5, 0.02, 1), 10);
  CHECK(std::abs(eval_loss(model, data) - std::log(10.0)) < 0.05);
}

TEST_CASE("eval_loss limits and naive agreement") {
  std::mt19937_64 rng(12);
  auto data = random_set(20, 4, 3, 5, rng);
  SequenceModel model = init_sequence_model(spec_for(Architecture::GRU, 8, 3, 0.3, 2), 5);
  double naive = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) naive += naive_ce(model, data.dense[i], data.labels[i]);
  CHECK(std::abs(eval_loss(model, data) - naive / 20.0) < 1e-12);

  model.out_w.fill(0.0);
  std::fill(model.out_b.begin(), model.out_b.end(), 0.0);
  CHECK(eval_loss(model, data) == doctest::Approx(std::log(5.0)).epsilon(1e-14));

  for (int& l : data.labels) l = 2;
  model.out_b[2] = 60.0;
  CHECK(eval_loss(model, data) < 1e-20);
}

TEST_CASE("a single-class task is learned quickly") {
  std::mt19937_64 rng(13);
  const auto train = random_set(64, 8, 4, 10, rng, 3);
  const auto val = random_set(16, 8, 4, 10, rng, 3);
  const SequenceModel model = init_sequence_model(spec_for(Architecture::LSTM, 32, 4, 0.1, 4), 10);
  SupervisedTrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 8;
  cfg.seed = 1;
  const auto r = bptt_train(model, train, val, cfg);
  CHECK_FALSE(r.failed);
  CHECK(r.validation_curve.size() == 5);
  CHECK(r.validation_curve.back() < 0.01);
  CHECK(eval_loss(r.model, val) < 0.01);
  REQUIRE(r.checkpoints.size() == 2);
  CHECK(r.checkpoints[0].model == model);
  CHECK(r.checkpoints[1].model == r.model);
}

TEST_CASE("training is reproducible and differs by seed") {
  std::mt19937_64 rng(14);
  const auto train = random_set(24, 5, 3, 3, rng);
  const SequenceModel model = init_sequence_model(spec_for(Architecture::VanillaRNN, 6, 3, 0.3, 5), 3);
  SupervisedTrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 5;
  cfg.seed = 7;
  const auto a = bptt_train(model, train, train, cfg);
  const auto b = bptt_train(model, train, train, cfg);
  CHECK(a.model == b.model);
  cfg.seed = 8;
  CHECK_FALSE(bptt_train(model, train, train, cfg).model == a.model);
}

TEST_CASE("model checkpoint round trip preserves the loss") {
  std::mt19937_64 rng(15);
  const auto data = random_set(10, 6, 3, 4, rng);
  const SequenceModel model = init_sequence_model(spec_for(Architecture::LSTM, 5, 3, 0.5, 6), 4);
  const auto base = std::filesystem::temp_directory_path() / "lyap-test-model";
  save_model(base, model);
  const SequenceModel back = load_model(base);
  std::filesystem::remove(base.string() + ".bin");
  std::filesystem::remove(base.string() + ".json");
  CHECK(back == model);
  CHECK(std::abs(eval_loss(back, data) - eval_loss(model, data)) < 1e-12);
}

TEST_CASE("token sets are presented one-hot") {
  CharDataset ds;
  ds.vocabulary = {U'a', U'b', U'c'};
  ds.seq_len = 3;
  ds.sequences = {{0, 2, 1}};
  const std::vector<std::size_t> idx{0};
  const auto set = char_subset(ds, idx);
  CHECK(set.labels == std::vector<int>{1});
  const Matrix x = set.inputs(0);
  CHECK(x.rows() == 2);
  CHECK(x.cols() == 3);
  CHECK(x(0, 0) == 1.0);
  CHECK(x(1, 2) == 1.0);
  CHECK(x(1, 0) == 0.0);
}
