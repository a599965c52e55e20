#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "lyap/aelle.hpp"
#include "test_support.hpp"

using namespace lyap;

namespace {

SpectrumRecord record(Vector values, double loss, std::string id = "x") {
  SpectrumRecord r;
  r.variant_id = std::move(id);
  r.values = std::move(values);
  r.target_loss = loss;
  return r;
}

void randomize(AeModel& m, std::mt19937_64& rng) {
  auto ps = ae_parameters(m);
  for (auto& p : ps) p = testing::random_matrix(p.rows(), p.cols(), rng, 0.7);
  set_ae_parameters(m, ps);
}

double best_split_accuracy(std::vector<double> x, const std::vector<int>& y) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  const double n = static_cast<double>(x.size());
  int ones_total = 0;
  for (int v : y) ones_total += v;
  double best = 0.0;
  int ones_left = 0;
  for (std::size_t cut = 0; cut <= idx.size(); ++cut) {
    const double left = static_cast<double>(cut);
    // left predicted 1, right predicted 0; or the reverse
    const double a = ones_left + ((n - left) - (ones_total - ones_left));
    best = std::max({best, a / n, (n - a) / n});
    if (cut < idx.size()) ones_left += y[idx[cut]];
  }
  return best;
}

}  // namespace

TEST_CASE("ae_loss arithmetic") {
  const Vector z{1.0, 0.0}, zh{0.0, 0.0};
  CHECK(ae_loss(z, zh, 1.0, 0.5, 2.0, LossNorm::L1) == doctest::Approx(1.5));
  CHECK(ae_loss(z, zh, 1.0, 0.5, 2.0, LossNorm::L2) == doctest::Approx(0.5 + 2.0 * 0.25));
  CHECK(ae_loss(z, z, 3.0, 3.0, 5.0, LossNorm::L1) == 0.0);
  CHECK(ae_loss(z, zh, 1.0, -7.0, 0.0, LossNorm::L1) == 0.5);
  CHECK_THROWS_AS(ae_loss(z, zh, 1.0, 0.5, -1.0, LossNorm::L1), ContractError);
}

TEST_CASE("alpha schedule") {
  AeConfig c;
  c.alpha_max = 2.0;
  c.alpha_ramp_start_epoch = 10;
  c.alpha_ramp_epochs = 20;
  CHECK(alpha_at(c, 0) == 0.0);
  CHECK(alpha_at(c, 9) == 0.0);
  CHECK(alpha_at(c, 20) == doctest::Approx(1.0));
  CHECK(alpha_at(c, 30) == 2.0);
  CHECK(alpha_at(c, 500) == 2.0);
  for (std::size_t e = 1; e < 60; ++e) {
    CHECK(alpha_at(c, e) >= alpha_at(c, e - 1));
    CHECK(alpha_at(c, e) - alpha_at(c, e - 1) <= 2.0 / 20.0 + 1e-15);
  }
  c.alpha_ramp_start_epoch.reset();
  c.alpha_ramp_fallback_epoch = 50;
  CHECK(alpha_at(c, 50) == 0.0);
  CHECK(alpha_at(c, 100) == 2.0);
}

TEST_CASE("zero network and single-evaluation consistency") {
  const std::vector<std::size_t> sizes{6, 3};
  const AeModel zero = make_ae_model(8, sizes);
  const auto out = ae_forward(zero, Vector(8, 0.3));
  CHECK(out.reconstruction == Vector(8, 0.0));
  CHECK(out.prediction == 0.0);
  CHECK(out.latent == Vector(3, 0.0));

  std::mt19937_64 rng(1);
  AeModel m = init_ae_model(8, sizes, 4);
  randomize(m, rng);
  const Vector z = testing::random_vector(8, rng);
  const auto a = ae_forward(m, z);
  const auto b = ae_forward(m, z);
  CHECK(a.reconstruction == b.reconstruction);
  CHECK(a.prediction == b.prediction);
  for (double v : a.reconstruction) CHECK(std::isfinite(v));

  // decoder and predictor fed the returned latent give the same outputs
  AeModel dec_only = m;
  double t = m.predictor.b[0];
  for (std::size_t i = 0; i < 3; ++i) t += m.predictor.w(0, i) * a.latent[i];
  CHECK(t == doctest::Approx(a.prediction).epsilon(1e-14));
  Vector h = a.latent;
  for (std::size_t l = 0; l < m.decoder.size(); ++l) {
    Vector y(m.decoder[l].b);
    for (std::size_t r = 0; r < y.size(); ++r)
      for (std::size_t c = 0; c < h.size(); ++c) y[r] += m.decoder[l].w(r, c) * h[c];
    if (l + 1 < m.decoder.size())
      for (double& v : y) v = std::tanh(v);
    h = y;
  }
  CHECK(testing::max_rel_error(h, a.reconstruction) < 1e-13);
  CHECK_THROWS_AS(ae_forward(m, Vector(7, 0.0)), ContractError);
}

TEST_CASE("backprop gradients match finite differences") {
  const std::vector<std::size_t> sizes{6, 3};
  for (auto norm : {LossNorm::L1, LossNorm::L2}) {
    std::mt19937_64 rng(norm == LossNorm::L1 ? 2 : 3);
    AeModel m = make_ae_model(8, sizes);
    randomize(m, rng);
    const Vector z = testing::random_vector(8, rng);
    const double t = 0.8, alpha = 0.7;
    const auto grad = ae_gradient(m, z, t, alpha, norm);
    auto ps = ae_parameters(m);
    const double eps = 1e-6;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      Matrix fd(ps[k].rows(), ps[k].cols());
      for (std::size_t i = 0; i < ps[k].size(); ++i) {
        auto plus = ps, minus = ps;
        plus[k].values()[i] += eps;
        minus[k].values()[i] -= eps;
        AeModel mp = m, mm = m;
        set_ae_parameters(mp, plus);
        set_ae_parameters(mm, minus);
        const auto op = ae_forward(mp, z), om = ae_forward(mm, z);
        fd.values()[i] = (ae_loss(z, op.reconstruction, t, op.prediction, alpha, norm) -
                          ae_loss(z, om.reconstruction, t, om.prediction, alpha, norm)) /
                         (2.0 * eps);
      }
      CAPTURE(k);
      CHECK(testing::max_rel_error(grad[k], fd) < 1e-3);
    }
  }
}

TEST_CASE("constant dataset is reproduced") {
  const Vector s{0.1, -0.2, -0.5, -0.9, -1.4};
  std::vector<SpectrumRecord> recs(20, record(s, 0.25));
  AeConfig c;
  c.layer_sizes = {8, 3};
  c.epochs = 200;
  const auto r = ae_train(recs, c);
  const auto out = ae_reconstruct(r.model, s);
  double mse = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) mse += (out.spectrum[i] - s[i]) * (out.spectrum[i] - s[i]);
  CHECK(mse / 5.0 < 1e-4);
  CHECK(std::abs(std::log(out.loss + 1e-8) - std::log(0.25 + 1e-8)) < 1e-3);
}

TEST_CASE("without the prediction term reconstruction beats the mean") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  std::vector<SpectrumRecord> recs;
  for (int i = 0; i < 40; ++i) {
    const double a = n01(rng), b = n01(rng), c = n01(rng);
    Vector v(16);
    for (std::size_t k = 0; k < 16; ++k) {
      const double x = static_cast<double>(k) / 15.0;
      v[k] = 0.1 * a - (1.0 + 0.3 * b) * x + 0.2 * c * x * x;
    }
    std::sort(v.begin(), v.end(), std::greater<>());
    recs.push_back(record(v, std::exp(n01(rng))));
  }
  AeConfig cfg;
  cfg.layer_sizes = {16, 8, 4};
  cfg.alpha_max = 0.0;
  cfg.epochs = 300;
  cfg.seed = 9;
  const auto r = ae_train(recs, cfg);

  double baseline = 0.0, mse = 0.0;
  for (std::size_t k = 0; k < 16; ++k) {
    double mean = 0.0;
    for (const auto& rec : recs) mean += rec.values[k];
    mean /= 40.0;
    for (const auto& rec : recs) baseline += (rec.values[k] - mean) * (rec.values[k] - mean);
  }
  for (const auto& rec : recs) {
    const auto out = ae_reconstruct(r.model, rec.values);
    for (std::size_t k = 0; k < 16; ++k) mse += (out.spectrum[k] - rec.values[k]) * (out.spectrum[k] - rec.values[k]);
  }
  CAPTURE(mse);
  CAPTURE(baseline);
  CHECK(mse < 0.5 * baseline);

  // 10-epoch moving average of the objective never rises by more than 2%
  // plus 0.1% of where it started
  const auto& h = r.loss_history;
  auto avg = [&](std::size_t from) { return std::accumulate(h.begin() + from, h.begin() + from + 10, 0.0) / 10.0; };
  const double slack = 1e-3 * avg(0);
  for (std::size_t i = 10; i + 10 <= h.size(); i += 10) CHECK(avg(i) <= avg(i - 10) * 1.02 + slack);
  CHECK(avg(h.size() - 10) < avg(0));
}

TEST_CASE("two clusters separate along latent PC1") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::uniform_real_distribution<double> slope(2.0, 3.0);
  std::vector<SpectrumRecord> recs;
  std::vector<int> cluster;
  for (int i = 0; i < 60; ++i) {
    const bool steep = i % 2 == 0;
    const double a = slope(rng);
    Vector v(24);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double x = static_cast<double>(k) / 23.0;
      v[k] = (steep ? -a * x : -0.2 - 0.1 * x) + noise(rng);
    }
    std::sort(v.begin(), v.end(), std::greater<>());
    recs.push_back(record(v, steep ? 0.1 : 1.0));
    cluster.push_back(steep);
  }
  AeConfig cfg;
  cfg.layer_sizes = {32, 16, 8};
  cfg.epochs = 120;
  cfg.alpha_ramp_fallback_epoch = 40;
  cfg.alpha_ramp_epochs = 40;
  cfg.seed = 3;
  const auto r = ae_train(recs, cfg);
  std::vector<Vector> latents;
  for (const auto& rec : recs) latents.push_back(ae_encode(r.model, rec.values));
  const auto emb = pca_fit(latents);
  std::vector<double> pc1;
  for (const auto& l : latents) pc1.push_back(pca_project(emb, l, 1)[0]);
  CHECK(best_split_accuracy(pc1, cluster) >= 0.95);
}

TEST_CASE("divergence aborts with a diagnostic") {
  std::mt19937_64 rng(8);
  std::vector<SpectrumRecord> recs;
  for (int i = 0; i < 20; ++i) recs.push_back(record(testing::random_vector(4, rng), 0.1 * (i + 1)));
  for (auto& r : recs) std::sort(r.values.begin(), r.values.end(), std::greater<>());
  AeConfig cfg;
  cfg.layer_sizes = {4, 2};
  cfg.alpha_max = 1e12;
  cfg.alpha_ramp_start_epoch = 0;
  cfg.alpha_ramp_epochs = 1;
  cfg.learning_rate = 1e3;
  cfg.epochs = 50;
  try {
    ae_train(recs, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("alpha_max") != std::string::npos);
  }
}

TEST_CASE("autoencoder checkpoint round trip") {
  std::mt19937_64 rng(10);
  AeModel m = init_ae_model(8, std::vector<std::size_t>{6, 3}, 1);
  randomize(m, rng);
  m.spectrum_mean = testing::random_vector(8, rng);
  m.spectrum_scale = Vector(8, 1.5);
  m.target_mean = -2.2;
  m.target_scale = 0.3;
  const auto base = std::filesystem::temp_directory_path() / "lyap-test-ae";
  save_ae_model(base, m);
  const auto back = load_ae_model(base);
  std::filesystem::remove(base.string() + ".bin");
  std::filesystem::remove(base.string() + ".json");
  CHECK(back == m);
}

TEST_CASE("PCA on rank-1 data") {
  std::vector<Vector> pts;
  for (int i = 0; i < 10; ++i) {
    const double s = 0.3 * i - 1.0;
    pts.push_back({1.0 + 2.0 * s, -1.0 * s, 0.5 + 3.0 * s});
  }
  const auto e = pca_fit(pts);
  CHECK(std::abs(e.explained_ratio[0] - 1.0) < 1e-10);
  for (double v : pca_project(e, e.mean, 3)) CHECK(std::abs(v) < 1e-14);
  // largest-magnitude entry of each axis is positive
  CHECK(e.axes(0, 2) > 0.0);
}

TEST_CASE("PCA agrees with an independent solver and reconstructs") {
  std::mt19937_64 rng(11);
  std::vector<Vector> pts;
  const Matrix mix = testing::random_matrix(5, 5, rng);
  for (int i = 0; i < 50; ++i) {
    const Vector g = testing::random_vector(5, rng);
    Vector p(5, 0.0);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 5; ++c) p[r] += mix(r, c) * g[c] * (c + 1);
    pts.push_back(p);
  }
  const auto e = pca_fit(pts);

  Eigen::MatrixXd x(50, 5);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 5; ++j) x(i, j) = pts[i][j];
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 49.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const double total = es.eigenvalues().sum();
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(e.explained_ratio[i] - es.eigenvalues()(4 - i) / total) < 1e-10);
    double align = 0.0;
    for (int k = 0; k < 5; ++k) align += e.axes(i, k) * es.eigenvectors()(k, 4 - i);
    CHECK(std::abs(std::abs(align) - 1.0) < 1e-8);
  }

  double ortho = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < 5; ++k) d += e.axes(i, k) * e.axes(j, k);
      ortho += (d - (i == j)) * (d - (i == j));
    }
  CHECK(std::sqrt(ortho) < 1e-10);
  for (std::size_t i = 1; i < 5; ++i) CHECK(e.explained_ratio[i] <= e.explained_ratio[i - 1]);

  const auto coords = pca_project(e, pts, 5);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Vector back = e.mean;
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t k = 0; k < 5; ++k) back[k] += coords[i][r] * e.axes(r, k);
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(back[k] - pts[i][k]) < 1e-8);
    CHECK(coords[i] == pca_project(e, pts[i], 5));
  }

  Vector p = e.mean;
  for (std::size_t k = 0; k < 5; ++k) p[k] += e.axes(2, k);
  const auto unit = pca_project(e, p, 5);
  for (std::size_t r = 0; r < 5; ++r) CHECK(std::abs(unit[r] - (r == 2 ? 1.0 : 0.0)) < 1e-12);

  CHECK_THROWS_AS(pca_project(e, pts[0], 0), ContractError);
  CHECK_THROWS_AS(pca_project(e, pts[0], 6), ContractError);
  CHECK_THROWS_AS(pca_fit(std::vector<Vector>{{1.0}}), ContractError);
  CHECK(embedding_from_json(embedding_to_json(e)) == e);
}
