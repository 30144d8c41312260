#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridssl/gridcode.hpp"
#include "gridssl/model.hpp"
#include "gridssl/tensor.hpp"
#include "gridssl/trajectory.hpp"

namespace gridssl {

// Binned mean activation of one unit over an arena box. Values are the
// per-bin sample mean where the bin was ever visited and NaN where it was
// not; bins below min_occupancy are present but excluded from analyses.
struct Ratemap {
  std::size_t unit = 0;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // arena box, meters
  double bin_size = 0.02;
  std::size_t nx = 0, ny = 0;
  Tensor<double> values;                 // (ny, nx)
  std::vector<std::uint32_t> occupancy;  // ny*nx, row-major
  std::uint32_t min_occupancy = 10;
  bool dead = false;  // peak activation over the walk < 1e-6

  std::uint32_t occ(std::size_t iy, std::size_t ix) const {
    return occupancy[iy * nx + ix];
  }
  bool valid(std::size_t iy, std::size_t ix) const {
    return occ(iy, ix) >= min_occupancy;
  }
  double fraction_valid() const;
};

constexpr double kDeadRate = 1e-6;

// Streams (position, all-unit activation) samples into per-unit maps sharing
// one occupancy grid.
class RatemapAccumulator {
 public:
  RatemapAccumulator(std::size_t n_units, double x0, double y0, double x1,
                     double y1, double bin_size,
                     std::uint32_t min_occupancy = 10);

  // One sample; acts has n_units entries. Positions outside the box are
  // dropped.
  void add(double x, double y, const double* acts);

  std::size_t samples_binned() const { return binned_; }
  std::vector<Ratemap> finalize() const;

 private:
  std::size_t n_units_, nx_, ny_;
  double x0_, y0_, x1_, y1_, bin_size_;
  std::uint32_t min_occupancy_;
  std::size_t binned_ = 0;
  std::vector<double> sums_;           // n_units * ny*nx
  std::vector<std::uint32_t> counts_;  // ny*nx
  std::vector<double> peak_;           // n_units
};

// Unrolls the model over an evaluation walk and bins every state row at its
// post-step position. The walk's square [0, arena_side]^2 is the box.
std::vector<Ratemap> compute_ratemaps(const ModelParams<double>& params,
                                      const EvalTrajectory& traj,
                                      double bin_size,
                                      std::uint32_t min_occupancy = 10,
                                      std::size_t chunk = 1024);

// Same binning fed with analytic code states instead of model states.
std::vector<Ratemap> compute_oracle_ratemaps(const IdealCode& code,
                                             const EvalTrajectory& traj,
                                             double bin_size,
                                             std::uint32_t min_occupancy = 10,
                                             bool normalize = true);

// Ratemap file ("GSRM", little-endian): magic, version u32, unit u32,
// bins_x u32, bins_y u32, bin_size f64, box f64 x4, then ny*nx row-major
// f64 values, then ny*nx u32 occupancy.
void write_ratemap(const std::string& path, const Ratemap& map);
Ratemap read_ratemap(const std::string& path);

}  // namespace gridssl
