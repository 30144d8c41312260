#include "gridssl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gridssl/error.hpp"
#include "gridssl/image.hpp"
#include "gridssl/report.hpp"
#include "gridssl/rng.hpp"
#include "gridssl/trajectory.hpp"

namespace gridssl {

namespace {

// master-seed streams 0 and 1 belong to training
constexpr std::uint64_t kStreamEvalWalk = 2;
constexpr std::uint64_t kStreamEvalCurves = 3;
constexpr std::uint64_t kStreamEvalCommutation = 4;

struct CollectedStates {
  Tensor<double> sub_states;     // (K, N) strided rows
  Tensor<double> sub_positions;  // (K, 2)
  Tensor<double> head_states;    // leading contiguous rows
};

// Runs every per-unit and population analysis that is common to model and
// oracle evaluations.
void analyze(EvalResult& res, const CollectedStates& col,
             const EvalConfig& cfg) {
  const std::size_t n_units = res.ratemaps.size();
  res.correlograms.resize(n_units);
  res.scores.resize(n_units);
  res.summaries.reserve(n_units);
  for (std::size_t u = 0; u < n_units; ++u) {
    try {
      res.correlograms[u] = autocorrelogram(res.ratemaps[u]);
      res.scores[u] = grid_score(res.correlograms[u]);
    } catch (const NumericError&) {
      res.correlograms[u] = Tensor<double>();
      res.scores[u] = GridScore{};
    }
    res.summaries.push_back(
        fourier_summary(res.ratemaps[u], &res.correlograms[u]));
  }

  res.modules = cluster_modules(res.summaries);

  res.spatial = spatial_distance_curve(
      col.sub_states, col.sub_positions, cfg.arena_side / 2.0, cfg.curve_bins,
      cfg.curve_pairs, derive_seed(cfg.seed, kStreamEvalCurves, 0));
  const std::size_t head = col.head_states.shape.rows();
  if (head >= 2)
    res.temporal = temporal_distance_curve(
        col.head_states, std::min(cfg.temporal_max_lag, head - 1));
  res.pair_cdf =
      pairwise_distance_sample(col.sub_positions, cfg.cdf_pairs,
                               derive_seed(cfg.seed, kStreamEvalCurves, 1));

  res.torus.resize(res.modules.modules.size());
  res.torus_ran.assign(res.modules.modules.size(), false);
  const std::size_t K = col.sub_states.shape.rows();
  for (std::size_t m = 0; m < res.modules.modules.size(); ++m) {
    const auto& units = res.modules.modules[m].units;
    if (units.size() < 3 || K < cfg.torus_min_samples) continue;
    Tensor<double> states(Shape::mat(K, units.size()));
    Tensor<double> phases(Shape::mat(units.size(), 3));
    for (std::size_t c = 0; c < units.size(); ++c) {
      for (std::size_t s = 0; s < K; ++s)
        states.at(s, c) = col.sub_states.at(s, units[c]);
      const auto& sum = res.summaries[units[c]];  // summaries are unit-ordered
      for (std::size_t a = 0; a < 3; ++a) phases.at(c, a) = sum.phase[a];
    }
    try {
      res.torus[m] = torus_analysis(states, phases, cfg.torus_knn,
                                    cfg.torus_max_embed,
                                    cfg.torus_min_samples);
      res.torus_ran[m] = true;
    } catch (const ConfigError&) {
    }
  }
}

}  // namespace

void EvalConfig::validate() const {
  if (!(arena_side > 0)) throw ConfigError("eval: arena_side must be positive");
  if (bin_size < 0) throw ConfigError("eval: bin_size must be nonnegative");
  if (eval_steps < 2) throw ConfigError("eval: eval_steps too small");
  if (!(smoothness >= 0 && smoothness < 1))
    throw ConfigError("eval: smoothness must be in [0,1)");
  if (!(speed_max > 0)) throw ConfigError("eval: speed_max must be positive");
  if (state_samples < 2) throw ConfigError("eval: state_samples too small");
  if (curve_bins == 0) throw ConfigError("eval: curve_bins must be positive");
}

CommutationStats commutation_report(const ModelParams<double>& params,
                                    std::size_t n_states, std::size_t n_pairs,
                                    double speed_max, std::uint64_t seed) {
  if (n_states == 0 || n_pairs == 0)
    throw ConfigError("commutation: need states and pairs");
  Rng rng(seed);

  // reachable states: short random walks from the rest state
  std::vector<Tensor<double>> anchors;
  anchors.reserve(n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    Tensor<double> vel(Shape::mat(10, 2));
    for (std::size_t t = 0; t < 10; ++t) {
      vel.at(t, 0) = rng.uniform(-speed_max, speed_max);
      vel.at(t, 1) = rng.uniform(-speed_max, speed_max);
    }
    const auto seq = unroll(params, vel);
    Tensor<double> g(Shape::vec(params.g0.size()));
    for (std::size_t i = 0; i < g.size(); ++i)
      g.v[i] = seq.states.at(seq.steps() - 1, i);
    anchors.push_back(std::move(g));
  }

  CommutationStats st;
  st.pairs = n_pairs;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const auto a = static_cast<std::size_t>(
                       rng.uniform() * static_cast<double>(anchors.size())) %
                   anchors.size();
    const double v1[2] = {rng.uniform(-speed_max, speed_max),
                          rng.uniform(-speed_max, speed_max)};
    const double v2[2] = {rng.uniform(-speed_max, speed_max),
                          rng.uniform(-speed_max, speed_max)};
    const double r = commutation_residual(params, v1, v2, anchors[a]);
    st.mean += r;
    st.max = std::max(st.max, r);
  }
  st.mean /= static_cast<double>(n_pairs);
  return st;
}

EvalResult run_eval_model(const Checkpoint& ckpt, const EvalConfig& cfg) {
  cfg.validate();
  EvalResult res;
  res.config = cfg;
  res.from_model = true;
  res.checkpoint_updates = ckpt.updates;
  res.checkpoint_seed = ckpt.master_seed;

  Rng walk_rng(derive_seed(cfg.seed, kStreamEvalWalk, 0));
  const auto traj = sample_eval_trajectory(cfg.arena_side, cfg.smoothness,
                                           cfg.eval_steps, walk_rng,
                                           cfg.speed_max);

  const std::size_t n = ckpt.params.g0.size();
  const std::size_t S = traj.steps();
  const std::size_t stride = std::max<std::size_t>(1, S / cfg.state_samples);
  const std::size_t n_sub = (S + stride - 1) / stride;
  const std::size_t n_head = std::min(cfg.temporal_window, S);

  CollectedStates col;
  col.sub_states = Tensor<double>(Shape::mat(n_sub, n));
  col.sub_positions = Tensor<double>(Shape::mat(n_sub, 2));
  col.head_states = Tensor<double>(Shape::mat(n_head, n));

  RatemapAccumulator acc(n, 0.0, 0.0, cfg.arena_side, cfg.arena_side,
                         cfg.resolved_bin(), cfg.min_occupancy);
  unroll_streaming(
      ckpt.params, traj.velocities, 2048,
      [&](const Tensor<double>& states, std::size_t row0) {
        for (std::size_t r = 0; r < states.shape.rows(); ++r) {
          const std::size_t t = row0 + r;
          const double* g = states.data() + r * n;
          acc.add(traj.positions.at(t, 0), traj.positions.at(t, 1), g);
          if (t % stride == 0) {
            const std::size_t k = t / stride;
            for (std::size_t i = 0; i < n; ++i) col.sub_states.at(k, i) = g[i];
            col.sub_positions.at(k, 0) = traj.positions.at(t, 0);
            col.sub_positions.at(k, 1) = traj.positions.at(t, 1);
          }
          if (t < n_head)
            for (std::size_t i = 0; i < n; ++i) col.head_states.at(t, i) = g[i];
        }
      });
  res.ratemaps = acc.finalize();

  analyze(res, col, cfg);
  res.commutation = commutation_report(
      ckpt.params, cfg.commutation_states, cfg.commutation_pairs,
      cfg.speed_max, derive_seed(cfg.seed, kStreamEvalCommutation, 0));
  return res;
}

EvalResult run_eval_oracle(const IdealCode& code, const EvalConfig& cfg) {
  cfg.validate();
  code.validate();
  EvalResult res;
  res.config = cfg;
  res.from_model = false;

  Rng walk_rng(derive_seed(cfg.seed, kStreamEvalWalk, 0));
  const auto traj = sample_eval_trajectory(cfg.arena_side, cfg.smoothness,
                                           cfg.eval_steps, walk_rng,
                                           cfg.speed_max);

  const std::size_t n = code.cells();
  const std::size_t S = traj.steps();
  const std::size_t stride = std::max<std::size_t>(1, S / cfg.state_samples);
  const std::size_t n_sub = (S + stride - 1) / stride;
  const std::size_t n_head = std::min(cfg.temporal_window, S);

  CollectedStates col;
  col.sub_states = Tensor<double>(Shape::mat(n_sub, n));
  col.sub_positions = Tensor<double>(Shape::mat(n_sub, 2));
  col.head_states = Tensor<double>(Shape::mat(n_head, n));

  RatemapAccumulator acc(n, 0.0, 0.0, cfg.arena_side, cfg.arena_side,
                         cfg.resolved_bin(), cfg.min_occupancy);
  for (std::size_t t = 0; t < S; ++t) {
    const double x = traj.positions.at(t, 0), y = traj.positions.at(t, 1);
    const auto g = code_state(code, x, y, true);
    acc.add(x, y, g.data());
    if (t % stride == 0) {
      const std::size_t k = t / stride;
      for (std::size_t i = 0; i < n; ++i) col.sub_states.at(k, i) = g.v[i];
      col.sub_positions.at(k, 0) = x;
      col.sub_positions.at(k, 1) = y;
    }
    if (t < n_head)
      for (std::size_t i = 0; i < n; ++i) col.head_states.at(t, i) = g.v[i];
  }
  res.ratemaps = acc.finalize();

  analyze(res, col, cfg);
  return res;
}

void write_eval_outputs(const std::string& dir, const EvalResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "ratemaps");
  fs::create_directories(fs::path(dir) / "images");

  char name[64];
  std::vector<RgbImage> tiles;
  tiles.reserve(result.ratemaps.size());
  for (std::size_t u = 0; u < result.ratemaps.size(); ++u) {
    const auto& map = result.ratemaps[u];
    std::snprintf(name, sizeof name, "unit_%04zu.gsrm", u);
    write_ratemap((fs::path(dir) / "ratemaps" / name).string(), map);

    double hi = 0;
    for (std::size_t b = 0; b < map.values.size(); ++b)
      if (!std::isnan(map.values.v[b])) hi = std::max(hi, map.values.v[b]);
    std::snprintf(name, sizeof name, "ratemap_%04zu.pgm", u);
    write_pgm((fs::path(dir) / "images" / name).string(), map.values, 0.0, hi);

    if (result.correlograms[u].size() > 0) {
      std::snprintf(name, sizeof name, "acorr_%04zu.pgm", u);
      write_pgm((fs::path(dir) / "images" / name).string(),
                result.correlograms[u], -1.0, 1.0);
    }
    tiles.push_back(render_ratemap(map));
  }

  const auto cols = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
  write_ppm((fs::path(dir) / "images" / "montage.ppm").string(),
            montage(tiles, std::max<std::size_t>(1, cols)));

  write_report((fs::path(dir) / "report.txt").string(), result);
}

}  // namespace gridssl
