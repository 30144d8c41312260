#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gridssl/losses.hpp"
#include "sic_check.hpp"
#include "testutil.hpp"

using namespace gridssl;
using G = Graph<double>;
using Id = G::Id;

namespace {

// Batch with given velocity rows, identity permutation, single trajectory.
TrajectoryBatch vel_batch(const std::vector<std::array<double, 2>>& vels) {
  TrajectoryBatch b;
  std::size_t T = vels.size();
  b.base_velocities = Tensor<double>(Shape::mat(T, 2));
  for (std::size_t t = 0; t < T; ++t) {
    b.base_velocities.at(t, 0) = vels[t][0];
    b.base_velocities.at(t, 1) = vels[t][1];
  }
  std::vector<std::uint32_t> id(T);
  for (std::size_t t = 0; t < T; ++t) id[t] = static_cast<std::uint32_t>(t);
  b.permutations.push_back(id);
  b.positions = Tensor<double>(Shape::cube(1, T, 2));
  double x = 0, y = 0;
  for (std::size_t t = 0; t < T; ++t) {
    x += vels[t][0];
    y += vels[t][1];
    b.positions.at(0, t, 0) = x;
    b.positions.at(0, t, 1) = y;
  }
  return b;
}

PairMask mask_from(const std::vector<std::array<double, 2>>& pos,
                   double sigma_x = 0.05) {
  Tensor<double> p(Shape::mat(pos.size(), 2));
  for (std::size_t i = 0; i < pos.size(); ++i) {
    p.at(i, 0) = pos[i][0];
    p.at(i, 1) = pos[i][1];
  }
  return build_pair_masks(p, sigma_x);
}

Id states_const(G& g, const std::vector<std::vector<double>>& rows) {
  Tensor<double> t(Shape::mat(rows.size(), rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[0].size(); ++j) t.at(i, j) = rows[i][j];
  return g.constant(std::move(t));
}

}  // namespace

TEST_CASE("capacity of identical unit states is exactly -1") {
  G g;
  auto s = states_const(g, {{0.6, 0.8, 0}, {0.6, 0.8, 0}, {0.6, 0.8, 0}});
  double cap = g.value(capacity_loss(g, s))[0];
  CHECK(std::abs(cap - (-1.0)) < 1e-12);
}

TEST_CASE("capacity of n orthonormal states is exactly -1/n") {
  for (std::size_t n : {2, 4, 5}) {
    G g;
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) rows[i][i] = 1.0;
    double cap = g.value(capacity_loss(g, states_const(g, rows)))[0];
    CHECK(std::abs(cap - (-1.0 / static_cast<double>(n))) < 1e-12);
  }
}

TEST_CASE("capacity of nonnegative unit states stays in [-1, 0]") {
  Rng rng(6);
  for (int it = 0; it < 30; ++it) {
    G g;
    std::size_t n = 2 + rng.below(6), d = 2 + rng.below(6);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& r : rows) {
      double s = 0;
      for (auto& x : r) {
        x = rng.uniform(0.0, 1.0);
        s += x * x;
      }
      for (auto& x : r) x /= std::sqrt(s);
    }
    double cap = g.value(capacity_loss(g, states_const(g, rows)))[0];
    CHECK(cap <= 1e-15);
    CHECK(cap >= -1.0 - 1e-12);
  }
}

TEST_CASE("separation of one far pair at distance^2 = 2 sigma_g^2 is exp(-1)") {
  LossConfig cfg;
  G g;
  // ||g1 - g2||^2 = 0.4^2 + 0.4^2 = 2 sigma_g^2 with sigma_g = 0.4
  auto s = states_const(g, {{0.4, 0.0}, {0.0, 0.4}});
  auto m = mask_from({{0, 0}, {1, 0}});
  REQUIRE(m.far_count() == 1);
  double sep = g.value(separation_loss(g, s, m, cfg))[0];
  CHECK(std::abs(sep - std::exp(-1.0)) < 1e-12);
}

TEST_CASE("separation with no far pairs is exactly zero") {
  LossConfig cfg;
  G g;
  auto s = states_const(g, {{1.0, 0.0}, {0.0, 1.0}});
  auto m = mask_from({{0, 0}, {0.01, 0}});
  REQUIRE(m.far_count() == 0);
  CHECK(g.value(separation_loss(g, s, m, cfg))[0] == 0.0);
}

TEST_CASE("separation decreases as far states move apart") {
  LossConfig cfg;
  auto m = mask_from({{0, 0}, {1, 0}});
  double prev = 1e300;
  for (double d : {0.1, 0.3, 0.6, 1.0, 1.4}) {
    G g;
    auto s = states_const(g, {{0.0, 0.0}, {d, 0.0}});
    double sep = g.value(separation_loss(g, s, m, cfg))[0];
    CHECK(sep < prev);
    CHECK(sep > 0.0);
    prev = sep;
  }
}

TEST_CASE("invariance of coincident near states is exactly zero") {
  LossConfig cfg;
  G g;
  auto s = states_const(g, {{0.3, 0.7}, {0.3, 0.7}});
  auto m = mask_from({{0, 0}, {0.001, 0}});
  REQUIRE(m.near_count() == 1);
  CHECK(g.value(invariance_loss(g, s, m, cfg))[0] == 0.0);
}

TEST_CASE("invariance of one orthogonal near unit pair is exactly 2") {
  LossConfig cfg;
  G g;
  auto s = states_const(g, {{1.0, 0.0}, {0.0, 1.0}});
  auto m = mask_from({{0, 0}, {0.001, 0}});
  double inv = g.value(invariance_loss(g, s, m, cfg))[0];
  CHECK(std::abs(inv - 2.0) < 1e-12);
}

TEST_CASE("pairs at exactly sigma_x contribute to neither loss") {
  LossConfig cfg;
  // three states; pair (0,1) exactly at sigma_x, pair (0,2) far, pair (1,2) far
  auto m = mask_from({{0, 0}, {0.05, 0}, {1.0, 0}});
  REQUIRE(m.boundary_pairs.size() == 1);
  REQUIRE(m.near_count() == 0);
  REQUIRE(m.far_count() == 2);
  G g;
  auto s = states_const(g, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  double sep = g.value(separation_loss(g, s, m, cfg))[0];
  // only the two far pairs contribute, both at distance^2 = 2
  double expect = std::exp(-2.0 / (2 * cfg.sigma_g * cfg.sigma_g));
  CHECK(std::abs(sep - expect) < 1e-12);
  CHECK(g.value(invariance_loss(g, s, m, cfg))[0] == 0.0);
}

TEST_CASE("conformal-isometry ratios {1,3} give population variance 1") {
  // 1-D states spaced 0.01 then 0.03 apart, speeds 0.01 each
  auto b = vel_batch({{0.01, 0}, {0.01, 0}});
  G g;
  auto g0 = g.constant(Tensor<double>::from(Shape::vec(1), {0.0}));
  std::vector<Id> states{
      g.constant(Tensor<double>::from(Shape::vec(1), {0.01})),
      g.constant(Tensor<double>::from(Shape::vec(1), {0.04}))};
  auto cn = coniso_loss(g, states, g0, b, 0.05);
  CHECK(cn.count == 2);
  CHECK_FALSE(cn.starved);
  CHECK(std::abs(g.value(cn.node)[0] - 1.0) < 1e-12);
}

TEST_CASE("proportional displacements give zero conformal-isometry loss") {
  auto b = vel_batch({{0.01, 0}, {0.02, 0}, {0.04, 0}});
  G g;
  auto g0 = g.constant(Tensor<double>::from(Shape::vec(1), {0.0}));
  // |dg| = 3 |v| at every step
  std::vector<Id> states{
      g.constant(Tensor<double>::from(Shape::vec(1), {0.03})),
      g.constant(Tensor<double>::from(Shape::vec(1), {0.09})),
      g.constant(Tensor<double>::from(Shape::vec(1), {0.21}))};
  auto cn = coniso_loss(g, states, g0, b, 0.05);
  CHECK(cn.count == 3);
  CHECK(g.value(cn.node)[0] < 1e-12);
}

TEST_CASE("a single qualifying step starves the conformal-isometry loss") {
  auto b = vel_batch({{0.01, 0}, {0.2, 0}, {0.0, 0.0}});
  // speeds: 0.01 qualifies; 0.2 >= sigma_x and 0 are both excluded
  G g;
  auto g0 = g.constant(Tensor<double>::from(Shape::vec(1), {0.0}));
  std::vector<Id> states{
      g.constant(Tensor<double>::from(Shape::vec(1), {0.01})),
      g.constant(Tensor<double>::from(Shape::vec(1), {0.02})),
      g.constant(Tensor<double>::from(Shape::vec(1), {0.03}))};
  auto cn = coniso_loss(g, states, g0, b, 0.05);
  CHECK(cn.count == 1);
  CHECK(cn.starved);
  CHECK(g.value(cn.node)[0] == 0.0);
}

TEST_CASE("raw sums equal normalized losses times pair counts") {
  Rng rng(14);
  auto p = ModelParams<double>::init(6, 8, rng);
  Rng rng2(15);
  auto b = sample_batch(3, 6, rng2, {-0.06, 0.06});
  auto m = build_pair_masks(b, 0.05);
  REQUIRE(m.far_count() > 0);
  REQUIRE(m.near_count() > 0);

  LossConfig cfg;
  Graph<double> g;
  auto u = build_unroll(g, p, b, 1e-8);
  auto L = build_sic_loss(g, u, b, m, cfg);

  LossConfig raw = cfg;
  raw.raw_sums = true;
  Graph<double> g2;
  auto u2 = build_unroll(g2, p, b, 1e-8);
  auto L2 = build_sic_loss(g2, u2, b, m, raw);

  CHECK(L2.values.sep ==
        doctest::Approx(L.values.sep * static_cast<double>(m.far_count()))
            .epsilon(1e-12));
  CHECK(L2.values.inv ==
        doctest::Approx(L.values.inv * static_cast<double>(m.near_count()))
            .epsilon(1e-12));
  CHECK(L2.values.cap == doctest::Approx(L.values.cap).epsilon(1e-15));
  CHECK(L2.values.coniso == doctest::Approx(L.values.coniso).epsilon(1e-15));
}

TEST_CASE("zero weights give zero total loss") {
  Rng rng(25);
  auto p = ModelParams<double>::init(5, 6, rng);
  Rng rng2(26);
  auto b = sample_batch(2, 5, rng2);
  auto m = build_pair_masks(b, 0.05);
  LossConfig cfg;
  cfg.lambda_sep = cfg.lambda_inv = cfg.lambda_cap = cfg.lambda_coniso = 0;
  Graph<double> g;
  auto u = build_unroll(g, p, b, 1e-8);
  auto L = build_sic_loss(g, u, b, m, cfg);
  CHECK(L.values.total == 0.0);
}

TEST_CASE("total composes components with the default weights") {
  Rng rng(33);
  auto p = ModelParams<double>::init(6, 8, rng);
  Rng rng2(34);
  auto b = sample_batch(2, 6, rng2, {-0.05, 0.05});
  auto m = build_pair_masks(b, 0.05);
  LossConfig cfg;
  Graph<double> g;
  auto u = build_unroll(g, p, b, 1e-8);
  auto L = build_sic_loss(g, u, b, m, cfg);
  double expect = 1.0 * L.values.sep + 0.1 * L.values.inv +
                  0.5 * L.values.cap + 0.1 * L.values.coniso;
  CHECK(L.values.total == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("tiled evaluation matches the single-tile result") {
  Rng rng(44);
  auto p = ModelParams<double>::init(5, 6, rng);
  Rng rng2(45);
  auto b = sample_batch(3, 7, rng2, {-0.06, 0.06});
  auto m = build_pair_masks(b, 0.05);
  LossConfig big;
  big.tile_rows = 4096;
  LossConfig small = big;
  small.tile_rows = 3;

  Graph<double> g1, g2;
  auto u1 = build_unroll(g1, p, b, 1e-8);
  auto L1 = build_sic_loss(g1, u1, b, m, big);
  auto u2 = build_unroll(g2, p, b, 1e-8);
  auto L2 = build_sic_loss(g2, u2, b, m, small);
  CHECK(L1.values.sep == doctest::Approx(L2.values.sep).epsilon(1e-12));
  CHECK(L1.values.inv == doctest::Approx(L2.values.inv).epsilon(1e-12));
  CHECK(L1.values.total == doctest::Approx(L2.values.total).epsilon(1e-12));

  // gradients must agree too
  g1.backward(L1.total);
  g2.backward(L2.total);
  const auto* a = g1.grad_of(u1.leaf.w3);
  const auto* c = g2.grad_of(u2.leaf.w3);
  REQUIRE(a);
  REQUIRE(c);
  for (std::size_t i = 0; i < a->size(); ++i)
    CHECK((*a)[i] == doctest::Approx((*c)[i]).epsilon(1e-10));
}

TEST_CASE("losses are invariant to trajectory order in the batch") {
  Rng rng(55);
  auto p = ModelParams<double>::init(5, 6, rng);
  Rng rng2(56);
  auto b = sample_batch(4, 5, rng2, {-0.06, 0.06});
  auto m = build_pair_masks(b, 0.05);
  LossConfig cfg;
  Graph<double> g1;
  auto u1 = build_unroll(g1, p, b, 1e-8);
  auto L1 = build_sic_loss(g1, u1, b, m, cfg);

  // reverse the trajectories
  TrajectoryBatch rb = b;
  std::reverse(rb.permutations.begin(), rb.permutations.end());
  for (std::size_t bb = 0; bb < 4; ++bb)
    for (std::size_t t = 0; t < 5; ++t)
      for (int c = 0; c < 2; ++c)
        rb.positions.at(bb, t, c) = b.positions.at(3 - bb, t, c);
  auto rm = build_pair_masks(rb, 0.05);
  Graph<double> g2;
  auto u2 = build_unroll(g2, p, rb, 1e-8);
  auto L2 = build_sic_loss(g2, u2, rb, rm, cfg);

  CHECK(L1.values.sep == doctest::Approx(L2.values.sep).epsilon(1e-12));
  CHECK(L1.values.inv == doctest::Approx(L2.values.inv).epsilon(1e-12));
  CHECK(L1.values.cap == doctest::Approx(L2.values.cap).epsilon(1e-12));
  CHECK(L1.values.coniso == doctest::Approx(L2.values.coniso).epsilon(1e-12));
}

TEST_CASE("reverse-mode gradients of the full objective match finite differences") {
  Rng rng(66);
  auto p = ModelParams<double>::init(4, 6, rng);
  Rng rng2(67);
  auto b = sample_batch(2, 3, rng2, {-0.08, 0.08});
  LossConfig cfg;
  auto res = testutil::sic_gradcheck(p, b, cfg);
  REQUIRE(res.far_pairs > 0);
  CHECK(res.max_rel_err < 1e-6);
  CHECK(res.params_checked == 4 * 4 * 6 + 4 * 4 + 6 * 6 + 6 + 6 * 2 + 6);
}
