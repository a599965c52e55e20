#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lyap/cells.hpp"
#include "lyap/lyapunov.hpp"

namespace lyap {

struct VariantGrid {
  Task task = Task::Synthetic;
  std::vector<Architecture> architectures;
  std::vector<std::size_t> hidden_sizes;
  std::vector<double> init_params;
  std::size_t replicates_per_point = 1;
  std::uint64_t master_seed = 0;
  std::size_t input_size = 1;

  void validate() const;
  std::size_t size() const {
    return architectures.size() * hidden_sizes.size() * init_params.size() * replicates_per_point;
  }
};

struct VariantSpec {
  std::string variant_id;
  Task task = Task::Synthetic;
  std::size_t replicate = 0;
  CellSpec cell;
  friend bool operator==(const VariantSpec&, const VariantSpec&) = default;
};

// Evenly spaced values lo..hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t count);

// Cartesian product in (architecture, size, param, replicate) order. Each
// variant's seed is derived from the master seed and its id alone, so any
// variant can be rebuilt without the rest of the grid.
std::vector<VariantSpec> generate_variants(const VariantGrid& grid);

VariantSpec make_variant(const VariantGrid& grid, Architecture arch, std::size_t hidden,
                         double init_param, std::size_t replicate);

// Rebuilds a variant from its id; throws ContractError if the id does not
// name a point of the grid.
VariantSpec regenerate_variant(const VariantGrid& grid, std::string_view variant_id);

std::string format_double(double v);

}  // namespace lyap
