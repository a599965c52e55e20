#pragma once

// On-disk formats.
//
// Spectra: JSON lines, one SpectrumRecord per line:
//   {"variant_id", "task", "architecture", "hidden_size", "init_param",
//    "training_fraction", "target_loss", "degenerate_flag", "spectrum"}
// Doubles are written in shortest round-trip form.
//
// Checkpoints: <base>.bin holds little-endian float64 tensors back to back;
// <base>.json describes them: {"format", "tensors": [{name, rows, cols,
// offset}], "meta": {...}}.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lyap/cells.hpp"
#include "lyap/lyapunov.hpp"

namespace lyap {

using json = nlohmann::json;

// Loss values that cannot be represented (inf/NaN, divergence) are stored as this cap.
inline constexpr double kLossCap = 1e9;

json spectrum_to_json(const SpectrumRecord& rec);
// Throws FormatError naming the offending field.
SpectrumRecord spectrum_from_json(const json& j);

void write_spectra(const std::filesystem::path& path, std::span<const SpectrumRecord> records,
                   bool append = false);
std::vector<SpectrumRecord> read_spectra(const std::filesystem::path& path);

json cell_spec_to_json(const CellSpec& spec);
CellSpec cell_spec_from_json(const json& j);

struct TensorBundle {
  std::vector<Param> tensors;
  json meta = json::object();
};

void save_tensors(const std::filesystem::path& base, const TensorBundle& bundle);
TensorBundle load_tensors(const std::filesystem::path& base);

void save_cell(const std::filesystem::path& base, const Cell& cell, json meta = json::object());
Cell load_cell(const std::filesystem::path& base);

// Writes text to path only through a temp file + rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace lyap
