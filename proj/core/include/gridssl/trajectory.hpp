#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gridssl/rng.hpp"
#include "gridssl/tensor.hpp"

namespace gridssl {

// Per-component uniform velocity range (m per step).
struct VelocityConfig {
  double lo = -0.15;
  double hi = 0.15;
};

// A training batch: B trajectories of T steps. In the default (permuted) mode
// all trajectories traverse random permutations of one shared base velocity
// sequence, so they share start and endpoint and differ only in path order.
// In independent mode (ablation) every trajectory draws its own sequence.
struct TrajectoryBatch {
  Tensor<double> base_velocities;                       // (T,2)
  std::vector<std::vector<std::uint32_t>> permutations; // B x T, empty if independent
  Tensor<double> independent_velocities;                // (B,T,2) if independent
  Tensor<double> positions;                             // (B,T,2), cumulative sums
  std::array<double, 2> origin{0.0, 0.0};
  std::uint64_t seed = 0;
  bool independent = false;

  std::size_t batch_size() const { return positions.shape.dim(0); }
  std::size_t steps() const { return positions.shape.dim(1); }

  double vx(std::size_t b, std::size_t t) const {
    return independent ? independent_velocities.at(b, t, 0)
                       : base_velocities.at(permutations[b][t], 0);
  }
  double vy(std::size_t b, std::size_t t) const {
    return independent ? independent_velocities.at(b, t, 1)
                       : base_velocities.at(permutations[b][t], 1);
  }
  double speed(std::size_t b, std::size_t t) const;

  // Positions flattened to ((B*T), 2) with index b*T + t.
  Tensor<double> flat_positions() const;
};

TrajectoryBatch sample_batch(std::size_t batch, std::size_t steps, Rng& rng,
                             const VelocityConfig& vc = {});
TrajectoryBatch sample_batch_independent(std::size_t batch, std::size_t steps,
                                         Rng& rng,
                                         const VelocityConfig& vc = {});

// Cumulative sum of velocity rows starting from origin. Row t holds the
// position after step t+1.
Tensor<double> integrate_positions(const Tensor<double>& velocities,
                                   std::array<double, 2> origin = {0.0, 0.0});

// Spatial proximity masks over flattened state indices. Pairs are unordered
// (stored with i < j). A pair is near when dist < sigma_x strictly, far when
// dist > sigma_x strictly; pairs at exactly sigma_x land in neither set.
// Distances compare as dx*dx + dy*dy against sigma_x*sigma_x, so "exactly"
// means exact floating-point equality of those expressions.
struct PairMask {
  std::size_t n = 0;
  double sigma_x = 0.0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> near_pairs;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> boundary_pairs;

  std::size_t total_pairs() const { return n * (n - 1) / 2; }
  std::size_t near_count() const { return near_pairs.size(); }
  std::size_t far_count() const {
    return total_pairs() - near_pairs.size() - boundary_pairs.size();
  }
  bool is_near(std::uint32_t i, std::uint32_t j) const;
};

PairMask build_pair_masks(const Tensor<double>& flat_positions, double sigma_x);
PairMask build_pair_masks(const TrajectoryBatch& batch, double sigma_x);

// Evaluation walk: smooth heading random walk with speed U(0, speed_max),
// specular reflection at the walls of [0, arena_side]^2, started at the
// center. smoothness in [0,1): 0 gives i.i.d. headings, values near 1 give
// slowly turning paths. velocities row t is the realized displacement, so
// integrating them reproduces positions exactly.
struct EvalTrajectory {
  double arena_side = 0.0;
  Tensor<double> positions;   // (S,2)
  Tensor<double> velocities;  // (S,2)
  std::size_t steps() const { return positions.shape.rows(); }
};

EvalTrajectory sample_eval_trajectory(double arena_side, double smoothness,
                                      std::size_t steps, Rng& rng,
                                      double speed_max = 0.15);

// Trajectory dump, one file per batch ("GSTJ", little-endian f64 payload).
void write_trajectory_dump(const std::string& path,
                           const TrajectoryBatch& batch);
void write_trajectory_dump(const std::string& path, const EvalTrajectory& t);
struct TrajectoryDump {
  std::uint32_t batch = 0, steps = 0;
  std::array<double, 2> origin{0.0, 0.0};
  Tensor<double> positions;   // (B,T,2)
  Tensor<double> velocities;  // (B,T,2)
};
TrajectoryDump read_trajectory_dump(const std::string& path);

}  // namespace gridssl
