#include "lyap/datasets.hpp"

#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "lyap/error.hpp"

namespace lyap {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::string& bytes, std::size_t offset, const std::filesystem::path& p) {
  if (bytes.size() < offset + 4) {
    std::ostringstream msg;
    msg << p.string() << ": header truncated at byte offset " << offset << " (file has "
        << bytes.size() << " bytes)";
    throw FormatError(msg.str());
  }
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void expect_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& p) {
  if (got != want) {
    std::ostringstream msg;
    msg << p.string() << ": bad magic 0x" << std::hex << got << " at byte offset 0, expected 0x"
        << want;
    throw FormatError(msg.str());
  }
}

void expect_payload(std::size_t have, std::size_t want, const std::filesystem::path& p) {
  if (have < want) {
    std::ostringstream msg;
    msg << p.string() << ": truncated payload, expected " << want << " bytes, got " << have;
    throw FormatError(msg.str());
  }
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

RowImageDataset load_mnist_idx(const std::filesystem::path& images,
                               const std::filesystem::path& labels, bool downsample2) {
  const std::string img = read_file(images);
  const std::string lab = read_file(labels);
  expect_magic(be32(img, 0, images), 0x00000803, images);
  expect_magic(be32(lab, 0, labels), 0x00000801, labels);
  const std::size_t count = be32(img, 4, images);
  const std::size_t rows = be32(img, 8, images);
  const std::size_t cols = be32(img, 12, images);
  const std::size_t label_count = be32(lab, 4, labels);
  if (count != label_count)
    throw FormatError("image count " + std::to_string(count) + " does not match label count " +
                      std::to_string(label_count));
  expect_payload(img.size() - 16, count * rows * cols, images);
  expect_payload(lab.size() - 8, count, labels);

  RowImageDataset ds;
  ds.height = downsample2 ? rows / 2 : rows;
  ds.width = downsample2 ? cols / 2 : cols;
  ds.images.reserve(count);
  ds.labels.reserve(count);
  const auto* px = reinterpret_cast<const unsigned char*>(img.data() + 16);
  for (std::size_t n = 0; n < count; ++n) {
    const unsigned char* base = px + n * rows * cols;
    Matrix m(ds.height, ds.width);
    for (std::size_t r = 0; r < ds.height; ++r)
      for (std::size_t c = 0; c < ds.width; ++c) {
        if (downsample2) {
          const std::size_t r0 = 2 * r, c0 = 2 * c;
          const unsigned sum = base[r0 * cols + c0] + base[r0 * cols + c0 + 1] +
                               base[(r0 + 1) * cols + c0] + base[(r0 + 1) * cols + c0 + 1];
          m(r, c) = static_cast<double>(sum) / (4.0 * 255.0);
        } else {
          m(r, c) = static_cast<double>(base[r * cols + c]) / 255.0;
        }
      }
    ds.images.push_back(std::move(m));
    const int label = static_cast<unsigned char>(lab[8 + n]);
    if (label > 9)
      throw FormatError(labels.string() + ": label " + std::to_string(label) +
                        " out of range at byte offset " + std::to_string(8 + n));
    ds.labels.push_back(label);
  }
  return ds;
}

void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::vector<std::uint8_t>>& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  put_be32(out, 0x00000803);
  put_be32(out, static_cast<std::uint32_t>(pixels.size()));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  for (const auto& im : pixels) {
    require(im.size() == rows * cols, "image has the wrong pixel count");
    out.write(reinterpret_cast<const char*>(im.data()), static_cast<std::streamsize>(im.size()));
  }
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if (b0 >= 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else if (b0 >= 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if (b0 >= 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if (b0 >= 0x80) {
      throw FormatError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > text.size())
      throw FormatError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80)
        throw FormatError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

CharDataset char_dataset_from_text(std::string_view utf8, std::size_t seq_len) {
  require(seq_len >= 2, "character sequences need seq_len >= 2");
  const auto cps = decode_utf8(utf8);
  CharDataset ds;
  ds.seq_len = seq_len;
  std::unordered_map<char32_t, int> index;
  std::vector<int> ids;
  ids.reserve(cps.size());
  for (char32_t c : cps) {
    auto [it, inserted] = index.try_emplace(c, static_cast<int>(ds.vocabulary.size()));
    if (inserted) ds.vocabulary.push_back(c);
    ids.push_back(it->second);
  }
  for (std::size_t start = 0; start + seq_len <= ids.size(); start += seq_len)
    ds.sequences.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(start),
                              ids.begin() + static_cast<std::ptrdiff_t>(start + seq_len));
  return ds;
}

CharDataset load_text_corpus(const std::filesystem::path& path, std::size_t seq_len) {
  return char_dataset_from_text(read_file(path), seq_len);
}

}  // namespace lyap
