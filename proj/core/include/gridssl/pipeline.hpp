#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridssl/cluster.hpp"
#include "gridssl/curves.hpp"
#include "gridssl/gridcode.hpp"
#include "gridssl/model.hpp"
#include "gridssl/ratemap.hpp"
#include "gridssl/spectral.hpp"
#include "gridssl/torus.hpp"

namespace gridssl {

struct EvalConfig {
  double arena_side = 2.0;
  double bin_size = 0.0;  // 0 scales with the arena: side/100 (2 cm at 2 m)
  std::size_t eval_steps = 400000;
  double smoothness = 0.7;
  double speed_max = 0.15;
  std::uint32_t min_occupancy = 10;
  std::uint64_t seed = 0;

  std::size_t state_samples = 20000;  // strided rows kept for curves/torus
  std::size_t curve_bins = 50;
  std::size_t curve_pairs = 200000;
  std::size_t temporal_window = 5000;  // leading rows for the temporal curve
  std::size_t temporal_max_lag = 200;
  std::size_t cdf_pairs = 20000;

  std::size_t torus_knn = 15;
  std::size_t torus_max_embed = 2000;
  std::size_t torus_min_samples = 5000;

  std::size_t commutation_states = 20;
  std::size_t commutation_pairs = 200;

  double resolved_bin() const {
    return bin_size > 0 ? bin_size : arena_side / 100.0;
  }
  void validate() const;
};

struct CommutationStats {
  double mean = 0.0;
  double max = 0.0;
  std::size_t pairs = 0;
};

// One-step update-order residual ||F(v2, F(v1, g)) - F(v1, F(v2, g))||
// sampled over random reachable states and velocity pairs.
CommutationStats commutation_report(const ModelParams<double>& params,
                                    std::size_t n_states, std::size_t n_pairs,
                                    double speed_max, std::uint64_t seed);

struct EvalResult {
  EvalConfig config;
  bool from_model = true;
  std::uint64_t checkpoint_updates = 0;
  std::uint64_t checkpoint_seed = 0;

  std::vector<Ratemap> ratemaps;
  std::vector<Tensor<double>> correlograms;  // empty where undefined
  std::vector<GridScore> scores;
  std::vector<UnitSpectralSummary> summaries;
  ModuleReport modules;

  DistanceCurve spatial;
  DistanceCurve temporal;
  std::vector<double> pair_cdf;  // sorted sampled pair distances

  std::vector<TorusResult> torus;  // parallel to modules
  std::vector<bool> torus_ran;

  CommutationStats commutation;  // model runs only
};

// Full analysis of a trained checkpoint over a fresh evaluation walk.
EvalResult run_eval_model(const Checkpoint& ckpt, const EvalConfig& cfg);

// The same pipeline fed with analytic code states; validates the estimators
// against planted ground truth.
EvalResult run_eval_oracle(const IdealCode& code, const EvalConfig& cfg);

// Writes ratemaps/unit_####.gsrm, images/ (PGM per ratemap and correlogram,
// montage PPM), and report.txt under dir, creating directories as needed.
void write_eval_outputs(const std::string& dir, const EvalResult& result);

}  // namespace gridssl
