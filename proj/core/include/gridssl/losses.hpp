#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "gridssl/graph.hpp"
#include "gridssl/model.hpp"
#include "gridssl/trajectory.hpp"

namespace gridssl {

struct LossConfig {
  double sigma_x = 0.05;  // spatial proximity scale (m)
  double sigma_g = 0.4;   // separation kernel width in state space
  double lambda_sep = 1.0;
  double lambda_inv = 0.1;
  double lambda_cap = 0.5;
  double lambda_coniso = 0.1;
  // Normalize separation by far-pair count and invariance by near-pair count
  // (keeps weights batch-size independent). raw_sums uses plain sums instead.
  bool raw_sums = false;
  // Rows of the pairwise-distance matrix materialized at once. Caps peak
  // memory at tile_rows * (B*T) doubles per intermediate.
  std::size_t tile_rows = 2048;

  void validate() const {
    if (!(sigma_x > 0)) throw ConfigError("sigma_x must be > 0");
    if (!(sigma_g > 0)) throw ConfigError("sigma_g must be > 0");
    if (lambda_sep < 0 || lambda_inv < 0 || lambda_cap < 0 ||
        lambda_coniso < 0)
      throw ConfigError("loss weights must be >= 0");
    if (tile_rows == 0) throw ConfigError("tile_rows must be positive");
  }
};

struct LossBreakdown {
  double sep = 0, inv = 0, cap = 0, coniso = 0, total = 0;
  std::size_t far_pairs = 0, near_pairs = 0, coniso_count = 0;
  bool coniso_starved = false;
};

namespace detail {

// Pairwise squared distances D(i,j) = |g_i|^2 + |g_j|^2 - 2 <g_i, g_j>,
// materialized in horizontal tiles of tile_rows rows each.
template <class Real>
struct DTiles {
  using Id = typename Graph<Real>::Id;
  struct Tile {
    Id d = -1;
    std::size_t row0 = 0, rows = 0;
  };
  std::vector<Tile> tiles;
  std::size_t n = 0;
};

template <class Real>
DTiles<Real> build_d_tiles(Graph<Real>& g, typename Graph<Real>::Id states,
                           std::size_t tile_rows) {
  DTiles<Real> out;
  const auto& sv = g.value(states);
  if (sv.shape.rank() != 2) throw ConfigError("states must be (n,N)");
  std::size_t n = sv.shape.rows();
  out.n = n;
  auto sq_all = g.sum(g.square(states), 1);                  // (n)
  auto sq_col = g.reshape(sq_all, Shape::mat(n, 1));
  auto sq_row = g.reshape(sq_all, Shape::mat(1, n));
  for (std::size_t r0 = 0; r0 < n; r0 += tile_rows) {
    std::size_t rows = std::min(tile_rows, n - r0);
    typename Graph<Real>::Id gt =
        rows == n ? states : g.slice_rows(states, r0, rows);
    typename Graph<Real>::Id ct =
        rows == n ? sq_col : g.slice_rows(sq_col, r0, rows);
    auto s = g.matmul(gt, states, false, true);              // (rows, n)
    auto d = g.sub(g.add(ct, sq_row), g.scalar_mul(s, Real(2)));
    out.tiles.push_back({d, r0, rows});
  }
  return out;
}

using PairList = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

// Flat indices of the ordered occurrences of `pairs` inside one tile.
inline std::vector<std::uint32_t> tile_entries(const PairList& pairs,
                                               std::size_t row0,
                                               std::size_t rows,
                                               std::size_t n) {
  std::vector<std::uint32_t> idx;
  for (auto [i, j] : pairs) {
    if (i >= row0 && i < row0 + rows)
      idx.push_back(static_cast<std::uint32_t>((i - row0) * n + j));
    if (j >= row0 && j < row0 + rows)
      idx.push_back(static_cast<std::uint32_t>((j - row0) * n + i));
  }
  return idx;
}

template <class Real>
typename Graph<Real>::Id separation_from_tiles(Graph<Real>& g,
                                               const DTiles<Real>& dt,
                                               const PairMask& mask,
                                               const LossConfig& cfg) {
  using Id = typename Graph<Real>::Id;
  if (mask.far_count() == 0)
    return g.constant(Tensor<Real>::scalar(Real(0)));
  const Real k = Real(-1.0 / (2.0 * cfg.sigma_g * cfg.sigma_g));
  PairList excluded = mask.near_pairs;
  excluded.insert(excluded.end(), mask.boundary_pairs.begin(),
                  mask.boundary_pairs.end());
  Id acc = -1;
  for (const auto& tile : dt.tiles) {
    auto e = g.exp(g.scalar_mul(tile.d, k));
    Id term = g.sum(e);
    std::vector<std::uint32_t> diag;
    diag.reserve(tile.rows);
    for (std::size_t i = tile.row0; i < tile.row0 + tile.rows; ++i)
      diag.push_back(static_cast<std::uint32_t>((i - tile.row0) * dt.n + i));
    term = g.sub(term, g.select_sum(e, std::move(diag)));
    auto excl = tile_entries(excluded, tile.row0, tile.rows, dt.n);
    if (!excl.empty()) term = g.sub(term, g.select_sum(e, std::move(excl)));
    acc = acc < 0 ? term : g.add(acc, term);
  }
  Real scale = Real(0.5);
  if (!cfg.raw_sums)
    scale /= static_cast<Real>(std::max<std::size_t>(mask.far_count(), 1));
  return g.scalar_mul(acc, scale);
}

template <class Real>
typename Graph<Real>::Id invariance_from_tiles(Graph<Real>& g,
                                               const DTiles<Real>& dt,
                                               const PairMask& mask,
                                               const LossConfig& cfg) {
  using Id = typename Graph<Real>::Id;
  if (mask.near_pairs.empty())
    return g.constant(Tensor<Real>::scalar(Real(0)));
  Id acc = -1;
  for (const auto& tile : dt.tiles) {
    auto entries = tile_entries(mask.near_pairs, tile.row0, tile.rows, dt.n);
    Id term = g.select_sum(tile.d, std::move(entries));
    acc = acc < 0 ? term : g.add(acc, term);
  }
  Real scale = Real(0.5);
  if (!cfg.raw_sums)
    scale /= static_cast<Real>(std::max<std::size_t>(mask.near_count(), 1));
  return g.scalar_mul(acc, scale);
}

}  // namespace detail

// Separation: sum over far pairs of exp(-||g_i - g_j||^2 / (2 sigma_g^2)).
template <class Real>
typename Graph<Real>::Id separation_loss(Graph<Real>& g,
                                         typename Graph<Real>::Id states,
                                         const PairMask& mask,
                                         const LossConfig& cfg) {
  auto dt = detail::build_d_tiles(g, states, cfg.tile_rows);
  return detail::separation_from_tiles(g, dt, mask, cfg);
}

// Invariance: sum over near pairs of ||g_i - g_j||^2.
template <class Real>
typename Graph<Real>::Id invariance_loss(Graph<Real>& g,
                                         typename Graph<Real>::Id states,
                                         const PairMask& mask,
                                         const LossConfig& cfg) {
  auto dt = detail::build_d_tiles(g, states, cfg.tile_rows);
  return detail::invariance_from_tiles(g, dt, mask, cfg);
}

// Capacity: -||mean_i g_i||^2, in [-1, 0] for nonnegative unit states.
template <class Real>
typename Graph<Real>::Id capacity_loss(Graph<Real>& g,
                                       typename Graph<Real>::Id states) {
  return g.scalar_mul(g.sum(g.square(g.mean(states, 0))), Real(-1));
}

template <class Real>
struct ConisoNodes {
  typename Graph<Real>::Id node = -1;
  std::size_t count = 0;
  bool starved = false;
};

// Conformal isometry: population variance of ||g_t - g_{t-1}|| / ||v_t|| over
// steps with 0 < ||v_t|| < sigma_x, pooled across the batch. Fewer than two
// qualifying steps contribute 0 and raise the starvation flag.
template <class Real>
ConisoNodes<Real> coniso_loss(Graph<Real>& g,
                              const std::vector<typename Graph<Real>::Id>& state_ids,
                              typename Graph<Real>::Id g0,
                              const TrajectoryBatch& batch, double sigma_x) {
  using Id = typename Graph<Real>::Id;
  std::size_t B = batch.batch_size(), T = batch.steps();
  if (state_ids.size() != B * T)
    throw ConfigError("coniso_loss: state list does not match batch layout");
  std::vector<Id> ratios;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      double speed = batch.speed(b, t);
      if (!(speed > 0.0 && speed < sigma_x)) continue;
      Id prev = t == 0 ? g0 : state_ids[b * T + t - 1];
      Id diff = g.sub(state_ids[b * T + t], prev);
      Id dist = g.l2norm(diff, Real(0));
      ratios.push_back(g.scalar_mul(dist, Real(1.0 / speed)));
    }
  }
  ConisoNodes<Real> out;
  out.count = ratios.size();
  if (ratios.size() < 2) {
    out.starved = true;
    out.node = g.constant(Tensor<Real>::scalar(Real(0)));
    return out;
  }
  out.node = g.variance(g.concat_rows(ratios));
  return out;
}

template <class Real>
struct SicLoss {
  using Id = typename Graph<Real>::Id;
  Id sep = -1, inv = -1, cap = -1, coniso = -1, total = -1;
  LossBreakdown values;
};

// Weighted SIC objective over a built unroll.
template <class Real>
SicLoss<Real> build_sic_loss(Graph<Real>& g, const UnrollBuild<Real>& u,
                             const TrajectoryBatch& batch,
                             const PairMask& mask, const LossConfig& cfg) {
  cfg.validate();
  SicLoss<Real> out;
  auto dt = detail::build_d_tiles(g, u.states, cfg.tile_rows);
  out.sep = detail::separation_from_tiles(g, dt, mask, cfg);
  out.inv = detail::invariance_from_tiles(g, dt, mask, cfg);
  out.cap = capacity_loss(g, u.states);
  auto cn = coniso_loss(g, u.state_ids, u.leaf.g0, batch, cfg.sigma_x);
  out.coniso = cn.node;

  auto total = g.scalar_mul(out.sep, Real(cfg.lambda_sep));
  total = g.add(total, g.scalar_mul(out.inv, Real(cfg.lambda_inv)));
  total = g.add(total, g.scalar_mul(out.cap, Real(cfg.lambda_cap)));
  total = g.add(total, g.scalar_mul(out.coniso, Real(cfg.lambda_coniso)));
  out.total = total;

  out.values.sep = static_cast<double>(g.value(out.sep)[0]);
  out.values.inv = static_cast<double>(g.value(out.inv)[0]);
  out.values.cap = static_cast<double>(g.value(out.cap)[0]);
  out.values.coniso = static_cast<double>(g.value(out.coniso)[0]);
  out.values.total = static_cast<double>(g.value(out.total)[0]);
  out.values.far_pairs = mask.far_count();
  out.values.near_pairs = mask.near_count();
  out.values.coniso_count = cn.count;
  out.values.coniso_starved = cn.starved;
  return out;
}

}  // namespace gridssl
