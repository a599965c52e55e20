#pragma once

// A cohort of network variants on disk.
//
//   <root>/variants.jsonl   {"variant_id", "task", "replicate", "cell": {...}}
//   <root>/losses.jsonl     {"variant_id", "target_loss", "failed", "curve": [[fraction, loss], ...]}
//   <root>/spectra.jsonl    SpectrumRecord rows
//   <root>/checkpoints/<variant_id>/f<fraction>.{bin,json}
//
// The in-memory index is rebuilt from these files on open. Rows are only
// ever appended; a stage that is re-run clears its own file first.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lyap/lyapunov.hpp"
#include "lyap/serialize.hpp"
#include "lyap/variants.hpp"

namespace lyap {

struct LossCurve {
  std::string variant_id;
  double target_loss = 0.0;
  bool failed = false;
  std::map<double, double> by_fraction;  // training fraction -> validation loss
  friend bool operator==(const LossCurve&, const LossCurve&) = default;
};

json variant_to_json(const VariantSpec& v);
VariantSpec variant_from_json(const json& j);
json loss_curve_to_json(const LossCurve& c);
LossCurve loss_curve_from_json(const json& j);

struct CohortEntry {
  VariantSpec spec;
  std::optional<LossCurve> losses;
  std::map<double, std::filesystem::path> checkpoints;  // fraction -> base path
  std::vector<SpectrumRecord> spectra;
};

class CohortStore {
 public:
  // Creates the root if needed and rebuilds the index from whatever is there.
  explicit CohortStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path variants_path() const { return root_ / "variants.jsonl"; }
  std::filesystem::path losses_path() const { return root_ / "losses.jsonl"; }
  std::filesystem::path spectra_path() const { return root_ / "spectra.jsonl"; }

  // Variants in insertion order.
  const std::vector<CohortEntry>& entries() const { return entries_; }
  const CohortEntry& entry(const std::string& variant_id) const;
  bool contains(const std::string& variant_id) const { return by_id_.contains(variant_id); }
  std::size_t size() const { return entries_.size(); }

  void add_variants(std::span<const VariantSpec> variants);
  void add_losses(std::span<const LossCurve> curves);
  void add_spectra(std::span<const SpectrumRecord> records);

  // Base path for a checkpoint; the caller writes it, then registers it.
  std::filesystem::path checkpoint_base(const std::string& variant_id, double fraction) const;
  void register_checkpoint(const std::string& variant_id, double fraction);

  // All spectra in file order.
  std::vector<SpectrumRecord> spectra() const;

  void clear_variants();  // drops everything
  void clear_losses();    // losses and checkpoints
  void clear_spectra();

 private:
  void rebuild();
  CohortEntry& mutable_entry(const std::string& variant_id);

  std::filesystem::path root_;
  std::vector<CohortEntry> entries_;
  std::map<std::string, std::size_t> by_id_;
  std::vector<std::pair<std::size_t, std::size_t>> spectrum_order_;  // (entry, index)
};

}  // namespace lyap
