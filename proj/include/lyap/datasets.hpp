#pragma once

// Task datasets: row-wise image sequences (IDX files) and fixed-length
// character sequences from a text corpus.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lyap/matrix.hpp"

namespace lyap {

struct RowImageDataset {
  std::size_t height = 0;  // sequence length
  std::size_t width = 0;   // input dimension
  std::vector<Matrix> images;  // height x width, pixels in [0, 1]
  std::vector<int> labels;
  std::size_t size() const { return images.size(); }
};

// Reads big-endian IDX image (magic 0x00000803) and label (0x00000801)
// files. With downsample2 each 2x2 block is averaged (odd edges dropped).
RowImageDataset load_mnist_idx(const std::filesystem::path& images,
                               const std::filesystem::path& labels, bool downsample2 = false);

void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::vector<std::uint8_t>>& pixels);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

struct CharDataset {
  std::vector<char32_t> vocabulary;  // index -> code point, first-appearance order
  std::size_t seq_len = 0;
  // Disjoint windows of seq_len indices; the first seq_len-1 are the input,
  // the last is the prediction target.
  std::vector<std::vector<int>> sequences;
  std::size_t size() const { return sequences.size(); }
};

CharDataset load_text_corpus(const std::filesystem::path& path, std::size_t seq_len);
CharDataset char_dataset_from_text(std::string_view utf8, std::size_t seq_len);

std::vector<char32_t> decode_utf8(std::string_view text);

}  // namespace lyap
