#include <bit>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "lyap/datasets.hpp"
#include "lyap/serialize.hpp"
#include "lyap/signals.hpp"
#include "test_support.hpp"

using namespace lyap;
using lyap::testing::TempDir;
namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

SpectrumRecord sample_record(std::size_t i, std::mt19937_64& rng) {
  SpectrumRecord r;
  r.variant_id = "v" + std::to_string(i);
  r.task = i % 2 ? Task::SMNIST : Task::TargetLearning;
  r.architecture = i % 3 ? Architecture::LSTM : Architecture::Rank1RNN;
  r.hidden_size = 10 + i;
  r.init_param = 0.1 * static_cast<double>(i + 1);
  r.training_fraction = i % 4 == 0 ? 1.0 : 0.1;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  r.target_loss = std::abs(u(rng));
  r.degenerate = i % 7 == 0;
  r.values = testing::random_vector(5 + i % 4, rng);
  std::sort(r.values.begin(), r.values.end(), std::greater<>());
  return r;
}

}  // namespace

TEST_CASE("IDX: hand-built two-image fixture") {
  TempDir dir;
  // 2 images of 2 rows x 3 cols, authored byte by byte.
  write_bytes(dir.path / "img", {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3,
                                 0, 51, 102, 153, 204, 255, 255, 0, 1, 2, 3, 4});
  write_bytes(dir.path / "lab", {0, 0, 8, 1, 0, 0, 0, 2, 7, 3});
  const auto ds = load_mnist_idx(dir.path / "img", dir.path / "lab");
  REQUIRE(ds.size() == 2);
  CHECK(ds.height == 2);
  CHECK(ds.width == 3);
  CHECK(ds.labels == std::vector<int>{7, 3});
  CHECK(ds.images[0](0, 1) == 51.0 / 255.0);
  CHECK(ds.images[0](1, 2) == 1.0);
  CHECK(ds.images[1](0, 0) == 1.0);
  CHECK(ds.images[1](1, 2) == 4.0 / 255.0);
}

TEST_CASE("IDX: empty header, truncation, bad magic, downsampling") {
  TempDir dir;
  write_bytes(dir.path / "img0", {0, 0, 8, 3, 0, 0, 0, 0, 0, 0, 0, 28, 0, 0, 0, 28});
  write_bytes(dir.path / "lab0", {0, 0, 8, 1, 0, 0, 0, 0});
  CHECK(load_mnist_idx(dir.path / "img0", dir.path / "lab0").size() == 0);

  write_bytes(dir.path / "img1", {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2});
  write_bytes(dir.path / "lab1", {0, 0, 8, 1, 0, 0, 0, 1, 5});
  try {
    load_mnist_idx(dir.path / "img1", dir.path / "lab1");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected 4 bytes") != std::string::npos);
    CHECK(msg.find("got 2") != std::string::npos);
  }

  write_bytes(dir.path / "bad", {0, 0, 8, 1, 0, 0, 0, 0});
  try {
    load_mnist_idx(dir.path / "bad", dir.path / "lab0");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
  }

  write_bytes(dir.path / "img2", {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 255, 255, 0});
  write_bytes(dir.path / "lab2", {0, 0, 8, 1, 0, 0, 0, 1, 1});
  const auto small = load_mnist_idx(dir.path / "img2", dir.path / "lab2", true);
  CHECK(small.height == 1);
  CHECK(small.width == 1);
  CHECK(small.images[0](0, 0) == doctest::Approx(0.5));
}

TEST_CASE("IDX writer round-trips through the reader") {
  TempDir dir;
  write_idx_images(dir.path / "i", 2, 2, {{0, 10, 20, 30}, {255, 254, 1, 0}});
  write_idx_labels(dir.path / "l", {9, 0});
  const auto ds = load_mnist_idx(dir.path / "i", dir.path / "l");
  CHECK(ds.images[1](0, 1) == 254.0 / 255.0);
  CHECK(ds.labels == std::vector<int>{9, 0});
}

TEST_CASE("text corpus") {
  auto ds = char_dataset_from_text("abcabc", 3);
  CHECK(ds.size() == 2);
  CHECK(ds.vocabulary.size() == 3);
  CHECK(ds.sequences[1] == std::vector<int>{0, 1, 2});

  CHECK(char_dataset_from_text("ab", 3).size() == 0);
  ds = char_dataset_from_text("abcdefg", 3);
  CHECK(ds.size() == 2);  // trailing "g" dropped
  CHECK_THROWS_AS(char_dataset_from_text("abc", 1), ContractError);

  ds = char_dataset_from_text("h\xC3\xA9h\xC3\xA9", 2);
  CHECK(ds.vocabulary == std::vector<char32_t>{U'h', U'é'});
  CHECK(ds.size() == 2);
  CHECK_THROWS_AS(char_dataset_from_text("\xC3", 2), FormatError);
}

TEST_CASE("bundled corpus and MNIST subset load") {
  const auto ds = load_text_corpus(LYAP_DATA_DIR "/text/shakespeare.txt", 101);
  CHECK(ds.size() == 1036489 / 101);
  CHECK(ds.vocabulary.size() == 76);
  for (const auto& s : ds.sequences)
    for (int id : s) REQUIRE(static_cast<std::size_t>(id) < ds.vocabulary.size());

  const auto mnist = load_mnist_idx(LYAP_DATA_DIR "/mnist/images-idx3-ubyte",
                                    LYAP_DATA_DIR "/mnist/labels-idx1-ubyte");
  CHECK(mnist.size() == 10000);
  CHECK(mnist.height == 28);
  CHECK(mnist.width == 28);
  const auto small = load_mnist_idx(LYAP_DATA_DIR "/mnist/images-idx3-ubyte",
                                    LYAP_DATA_DIR "/mnist/labels-idx1-ubyte", true);
  CHECK(small.height == 14);
  std::vector<int> per_class(10, 0);
  for (int l : mnist.labels) ++per_class[static_cast<std::size_t>(l)];
  for (int c : per_class) CHECK(c > 800);
}

TEST_CASE("four-sine target") {
  const auto f = gen_four_sine(600);
  double ss = 0.0;
  for (double v : f) ss += v * v;
  CHECK(std::abs(std::sqrt(ss / 600.0) - 1.0) < 1e-3);
  for (std::size_t t = 0; t + 60 < f.size(); ++t) CHECK(std::abs(f[t] - f[t + 60]) < 1e-9);

  // DFT oracle over 10 periods: energy only at bins 10, 20, 30, 40.
  const std::size_t n = f.size();
  std::vector<double> mag(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t)
      acc += f[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / double(n));
    mag[k] = std::abs(acc);
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    if (k == 10 || k == 20 || k == 30 || k == 40)
      CHECK(mag[k] > 10.0);
    else
      CHECK(mag[k] < 1e-8);
  }
  CHECK(mag[10] > mag[20]);
  CHECK(mag[20] > mag[30]);
  CHECK_THROWS_AS(gen_four_sine(0), ContractError);
}

TEST_CASE("spectra JSONL round trip") {
  TempDir dir;
  std::mt19937_64 rng(5);
  std::vector<SpectrumRecord> recs;
  for (std::size_t i = 0; i < 100; ++i) recs.push_back(sample_record(i, rng));
  write_spectra(dir.path / "s.jsonl", recs);
  CHECK(read_spectra(dir.path / "s.jsonl") == recs);

  write_spectra(dir.path / "s.jsonl", std::span(recs).first(3), true);
  CHECK(read_spectra(dir.path / "s.jsonl").size() == 103);
}

TEST_CASE("spectra JSONL schema violations name line and field") {
  TempDir dir;
  std::mt19937_64 rng(1);
  auto good = spectrum_to_json(sample_record(1, rng));
  auto bad = good;
  bad.erase("target_loss");
  {
    std::ofstream out(dir.path / "bad.jsonl");
    out << good.dump() << "\n" << bad.dump() << "\n";
  }
  try {
    read_spectra(dir.path / "bad.jsonl");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("target_loss") != std::string::npos);
  }
  bad = good;
  bad["spectrum"] = {0.0, 1.0};
  CHECK_THROWS_AS(spectrum_from_json(bad), FormatError);
}

TEST_CASE("doubles survive JSON bit-exactly") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::uint64_t> bits;
  std::vector<double> values{0.1 + 0.2, 1.0 / 3.0, -0.0, 5e-324, 1.7976931348623157e308};
  while (values.size() < 10000) {
    const double v = std::bit_cast<double>(bits(rng));
    if (std::isfinite(v)) values.push_back(v);
  }
  const json j = values;
  const auto back = json::parse(j.dump()).get<std::vector<double>>();
  REQUIRE(back.size() == values.size());
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    mismatches += std::bit_cast<std::uint64_t>(values[i]) != std::bit_cast<std::uint64_t>(back[i]);
  CHECK(mismatches == 0);
}

TEST_CASE("cell checkpoint round trip and truncation") {
  TempDir dir;
  CellSpec spec;
  spec.architecture = Architecture::GRU;
  spec.hidden_size = 5;
  spec.input_size = 3;
  spec.init_param = 0.2;
  spec.seed = 77;
  const Cell cell = init_cell(spec);
  save_cell(dir.path / "ck", cell, json{{"fraction", 0.5}});
  CHECK(load_cell(dir.path / "ck") == cell);
  CHECK(load_tensors(dir.path / "ck").meta["fraction"] == 0.5);

  fs::resize_file(dir.path / "ck.bin", 100);
  CHECK_THROWS_AS(load_cell(dir.path / "ck"), FormatError);
}
