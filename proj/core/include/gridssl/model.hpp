#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gridssl/graph.hpp"
#include "gridssl/rng.hpp"
#include "gridssl/tensor.hpp"
#include "gridssl/trajectory.hpp"

namespace gridssl {

// Velocity-conditioned RNN. A 3-layer ReLU MLP maps a 2-D velocity to an
// N x N interaction matrix W(v); the state update is
//   g_t = NormReLU(W(v_t) g_{t-1}),
// which keeps states nonnegative with unit L2 norm. g0 is a fixed (optionally
// trainable) start state.
template <class Real>
struct ModelParams {
  std::size_t n_units = 0, hidden = 0;
  Tensor<Real> w1, b1;  // (H,2), (H)
  Tensor<Real> w2, b2;  // (H,H), (H)
  Tensor<Real> w3, b3;  // (N*N,H), (N*N)
  Tensor<Real> g0;      // (N)
  bool train_g0 = false;

  // U(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases; g0 uniform on
  // the positive diagonal (1/sqrt(N) per component). Draws are made in f64 and
  // cast, so f32 initialization is the rounded f64 one.
  static ModelParams init(std::size_t n_units, std::size_t hidden, Rng& rng,
                          bool train_g0 = false) {
    ModelParams p;
    p.n_units = n_units;
    p.hidden = hidden;
    p.train_g0 = train_g0;
    auto draw = [&rng](Tensor<Real>& t, Shape s, double bound) {
      t = Tensor<Real>(s);
      for (auto& x : t.v)
        x = static_cast<Real>(rng.uniform(-bound, bound));
    };
    double i2 = 1.0 / std::sqrt(2.0);
    double ih = 1.0 / std::sqrt(static_cast<double>(hidden));
    draw(p.w1, Shape::mat(hidden, 2), i2);
    draw(p.b1, Shape::vec(hidden), i2);
    draw(p.w2, Shape::mat(hidden, hidden), ih);
    draw(p.b2, Shape::vec(hidden), ih);
    draw(p.w3, Shape::mat(n_units * n_units, hidden), ih);
    draw(p.b3, Shape::vec(n_units * n_units), ih);
    p.g0 = Tensor<Real>(Shape::vec(n_units),
                        static_cast<Real>(1.0 / std::sqrt(
                                              static_cast<double>(n_units))));
    return p;
  }

  std::vector<Tensor<Real>*> trainable() {
    std::vector<Tensor<Real>*> t{&w1, &b1, &w2, &b2, &w3, &b3};
    if (train_g0) t.push_back(&g0);
    return t;
  }
  std::vector<const Tensor<Real>*> all() const {
    return {&w1, &b1, &w2, &b2, &w3, &b3, &g0};
  }
  std::vector<Tensor<Real>*> all() {
    return {&w1, &b1, &w2, &b2, &w3, &b3, &g0};
  }
  std::size_t param_count() const {
    std::size_t n = 0;
    for (auto* t : all()) n += t->size();
    return n;
  }

  template <class Other>
  static ModelParams cast(const ModelParams<Other>& o) {
    ModelParams p;
    p.n_units = o.n_units;
    p.hidden = o.hidden;
    p.train_g0 = o.train_g0;
    p.w1 = Tensor<Real>::cast(o.w1);
    p.b1 = Tensor<Real>::cast(o.b1);
    p.w2 = Tensor<Real>::cast(o.w2);
    p.b2 = Tensor<Real>::cast(o.b2);
    p.w3 = Tensor<Real>::cast(o.w3);
    p.b3 = Tensor<Real>::cast(o.b3);
    p.g0 = Tensor<Real>::cast(o.g0);
    return p;
  }
};

// ---- plain (non-autodiff) forward paths, f64 ------------------------------

// W(v) for a single velocity.
Tensor<double> interaction_matrix(const ModelParams<double>& p, double vx,
                                  double vy);

// NormReLU(x) = relu(x) / ||relu(x)||. Errors when every component is
// nonpositive (zero vector has no direction).
Tensor<double> norm_relu(const Tensor<double>& x);

struct StateSequence {
  Tensor<double> states;  // (T,N)
  std::size_t steps() const { return states.shape.rows(); }
};

// Exact unroll (no norm epsilon). Throws DegenerateStateError carrying the
// offending 0-based step when a pre-activation has no positive component.
StateSequence unroll(const ModelParams<double>& p,
                     const Tensor<double>& velocities);

// Chunked unroll for long evaluation walks: invokes `sink(states, row0)` with
// (rows,N) blocks in order. Internally batches the MLP over each chunk.
void unroll_streaming(const ModelParams<double>& p,
                      const Tensor<double>& velocities, std::size_t chunk,
                      const std::function<void(const Tensor<double>&,
                                               std::size_t)>& sink);

// One-step commutation residual c(v1,v2) = ||F(v2,F(v1,g)) - F(v1,F(v2,g))||
// with F(v,g) = NormReLU(W(v) g), from start state g.
double commutation_residual(const ModelParams<double>& p,
                            const double v1[2], const double v2[2],
                            const Tensor<double>& g);

// ---- checkpoint ("GSCK") ---------------------------------------------------

struct Checkpoint {
  ModelParams<double> params;
  std::uint64_t updates = 0;     // optimizer updates applied so far
  std::uint64_t master_seed = 0; // run seed, for provenance
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

// ---- differentiable unroll --------------------------------------------------

template <class Real>
struct UnrollBuild {
  using Id = typename Graph<Real>::Id;
  Id states = -1;                 // (B*T, N), rows in (b,t) order, b-major
  std::vector<Id> state_ids;      // one per (b,t)
  struct {
    Id w1 = -1, b1 = -1, w2 = -1, b2 = -1, w3 = -1, b3 = -1, g0 = -1;
  } leaf;
  std::size_t distinct_velocities = 0;  // rows the MLP actually evaluated
};

// Build the full training-mode unroll into `g`. The interaction matrix is
// evaluated once per distinct velocity value and shared across every (b,t)
// that uses it. norm_eps > 0 smooths the norm so the graph stays
// differentiable even if a ReLU output is all-zero.
template <class Real>
UnrollBuild<Real> build_unroll(Graph<Real>& g, const ModelParams<Real>& p,
                               const TrajectoryBatch& batch, Real norm_eps) {
  using Id = typename Graph<Real>::Id;
  std::size_t B = batch.batch_size(), T = batch.steps();
  std::size_t N = p.n_units;

  UnrollBuild<Real> u;
  u.leaf.w1 = g.leaf(p.w1);
  u.leaf.b1 = g.leaf(p.b1);
  u.leaf.w2 = g.leaf(p.w2);
  u.leaf.b2 = g.leaf(p.b2);
  u.leaf.w3 = g.leaf(p.w3);
  u.leaf.b3 = g.leaf(p.b3);

  // Collect distinct velocity values; map every (b,t) to its MLP row.
  std::map<std::pair<double, double>, std::size_t> row_of;
  std::vector<std::size_t> bt_row(B * T);
  std::vector<std::pair<double, double>> rows;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      std::pair<double, double> v{batch.vx(b, t), batch.vy(b, t)};
      auto [it, inserted] = row_of.try_emplace(v, rows.size());
      if (inserted) rows.push_back(v);
      bt_row[b * T + t] = it->second;
    }
  u.distinct_velocities = rows.size();
  Tensor<Real> vmat(Shape::mat(rows.size(), 2));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    vmat.at(r, 0) = static_cast<Real>(rows[r].first);
    vmat.at(r, 1) = static_cast<Real>(rows[r].second);
  }

  Id V = g.constant(std::move(vmat));
  Id a1 = g.relu(g.add(g.matmul(V, u.leaf.w1, false, true), u.leaf.b1));
  Id a2 = g.relu(g.add(g.matmul(a1, u.leaf.w2, false, true), u.leaf.b2));
  Id a3 = g.add(g.matmul(a2, u.leaf.w3, false, true), u.leaf.b3);  // (U, N*N)

  std::vector<Id> wt(rows.size(), -1);
  auto matrix_for = [&](std::size_t row) {
    if (wt[row] < 0)
      wt[row] = g.reshape(g.slice_row(a3, row), Shape::mat(N, N));
    return wt[row];
  };

  u.leaf.g0 = p.train_g0 ? g.leaf(p.g0) : g.constant(p.g0);
  u.state_ids.reserve(B * T);
  for (std::size_t b = 0; b < B; ++b) {
    Id prev = u.leaf.g0;
    for (std::size_t t = 0; t < T; ++t) {
      Id W = matrix_for(bt_row[b * T + t]);
      Id h = g.matmul(W, prev);
      Id r = g.relu(h);
      Id st = g.div(r, g.l2norm(r, norm_eps));
      u.state_ids.push_back(st);
      prev = st;
    }
  }
  u.states = g.concat_rows(u.state_ids);
  return u;
}

}  // namespace gridssl
