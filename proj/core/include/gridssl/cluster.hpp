#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "gridssl/spectral.hpp"

namespace gridssl {

struct ModuleStats {
  std::vector<std::size_t> units;  // member unit ids
  double mean_period = 0.0;        // meters
  double mean_orientation = 0.0;   // circular mean on the 60-degree torus
  // per-axis resultant length of member phases; near 0 for uniform tiling
  std::array<double, 3> phase_resultant = {0.0, 0.0, 0.0};
  // Rayleigh test at alpha = 0.05 Bonferroni-corrected over the three axes:
  // true when no axis rejects uniformity
  bool phases_uniform = false;
};

struct ModuleReport {
  static constexpr int kUnclassified = -1;
  static constexpr int kDead = -2;
  std::vector<int> assignment;  // per summary: module index or flag above
  std::vector<ModuleStats> modules;
  std::size_t n_dead = 0;
  std::size_t n_unclassified = 0;
};

// Transitive linkage of classified units whose periods differ by at most
// period_tol (relative) and whose orientations differ by at most
// orient_tol_deg on the 60-degree circle. Links need both conditions;
// clusters with a single member stay unclassified. Modules are ordered by
// ascending mean period.
ModuleReport cluster_modules(const std::vector<UnitSpectralSummary>& summaries,
                             double period_tol = 0.10,
                             double orient_tol_deg = 5.0);

}  // namespace gridssl
