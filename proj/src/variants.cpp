#include "lyap/variants.hpp"

#include <charconv>
#include <cmath>

#include "lyap/error.hpp"
#include "lyap/rng.hpp"

namespace lyap {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void VariantGrid::validate() const {
  require(size() >= 1, "variant grid is empty");
  require(input_size >= 1, "variant grid input_size must be >= 1");
  for (double p : init_params) require(std::isfinite(p) && p > 0.0, "init params must be > 0");
  for (std::size_t h : hidden_sizes) require(h >= 1, "hidden sizes must be >= 1");
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  require(count >= 1, "linspace needs at least one point");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  out.back() = hi;
  return out;
}

VariantSpec make_variant(const VariantGrid& grid, Architecture arch, std::size_t hidden,
                         double init_param, std::size_t replicate) {
  VariantSpec v;
  v.task = grid.task;
  v.replicate = replicate;
  v.variant_id = std::string(task_name(grid.task)) + "-" + std::string(architecture_name(arch)) +
                 "-h" + std::to_string(hidden) + "-p" + format_double(init_param) + "-r" +
                 std::to_string(replicate);
  v.cell.architecture = arch;
  v.cell.hidden_size = hidden;
  v.cell.input_size = grid.input_size;
  v.cell.init_param = init_param;
  v.cell.seed = derive_seed(grid.master_seed, fnv1a(v.variant_id));
  return v;
}

std::vector<VariantSpec> generate_variants(const VariantGrid& grid) {
  grid.validate();
  std::vector<VariantSpec> out;
  out.reserve(grid.size());
  for (Architecture a : grid.architectures)
    for (std::size_t h : grid.hidden_sizes)
      for (double p : grid.init_params)
        for (std::size_t r = 0; r < grid.replicates_per_point; ++r)
          out.push_back(make_variant(grid, a, h, p, r));
  return out;
}

VariantSpec regenerate_variant(const VariantGrid& grid, std::string_view variant_id) {
  for (Architecture a : grid.architectures)
    for (std::size_t h : grid.hidden_sizes)
      for (double p : grid.init_params)
        for (std::size_t r = 0; r < grid.replicates_per_point; ++r) {
          auto v = make_variant(grid, a, h, p, r);
          if (v.variant_id == variant_id) return v;
        }
  throw ContractError("variant id '" + std::string(variant_id) + "' is not part of the grid");
}

}  // namespace lyap
