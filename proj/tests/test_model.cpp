#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "gridssl/error.hpp"
#include "gridssl/model.hpp"
#include "testutil.hpp"

using namespace gridssl;
using testutil::bytes_equal;

namespace {

TrajectoryBatch manual_batch(const std::vector<std::array<double, 2>>& vels,
                             std::size_t copies = 1) {
  TrajectoryBatch b;
  std::size_t T = vels.size();
  b.base_velocities = Tensor<double>(Shape::mat(T, 2));
  for (std::size_t t = 0; t < T; ++t) {
    b.base_velocities.at(t, 0) = vels[t][0];
    b.base_velocities.at(t, 1) = vels[t][1];
  }
  b.positions = Tensor<double>(Shape::cube(copies, T, 2));
  for (std::size_t c = 0; c < copies; ++c) {
    std::vector<std::uint32_t> id(T);
    for (std::size_t t = 0; t < T; ++t) id[t] = static_cast<std::uint32_t>(t);
    b.permutations.push_back(id);
    double x = 0, y = 0;
    for (std::size_t t = 0; t < T; ++t) {
      x += vels[t][0];
      y += vels[t][1];
      b.positions.at(c, t, 0) = x;
      b.positions.at(c, t, 1) = y;
    }
  }
  return b;
}

}  // namespace

TEST_CASE("norm_relu clips then normalizes") {
  auto y = norm_relu(Tensor<double>::from(Shape::vec(3), {3, 4, -5}));
  CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(y[2] == 0.0);
}

TEST_CASE("norm_relu fixes nonnegative unit vectors") {
  Rng rng(2);
  for (int it = 0; it < 20; ++it) {
    Tensor<double> x(Shape::vec(8));
    for (auto& v : x.v) v = rng.uniform(0.0, 1.0);
    auto once = norm_relu(x);
    auto twice = norm_relu(once);
    for (std::size_t i = 0; i < 8; ++i)
      CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-14));
  }
}

TEST_CASE("norm_relu rejects all-nonpositive input") {
  CHECK_THROWS_AS(norm_relu(Tensor<double>::from(Shape::vec(3), {-1, -2, 0})),
                  NumericError);
}

TEST_CASE("interaction matrix is a pure function of velocity") {
  Rng rng(7);
  auto p = ModelParams<double>::init(6, 12, rng);
  auto a = interaction_matrix(p, 0.1, -0.05);
  auto b = interaction_matrix(p, 0.1, -0.05);
  CHECK(bytes_equal(a, b));
  CHECK(a.shape == Shape::mat(6, 6));
}

TEST_CASE("zero MLP weights give the zero interaction matrix") {
  Rng rng(7);
  auto p = ModelParams<double>::init(4, 8, rng);
  for (auto* t : p.all()) t->fill(0.0);
  auto W = interaction_matrix(p, 0.08, 0.02);
  for (std::size_t i = 0; i < W.size(); ++i) CHECK(W[i] == 0.0);
}

TEST_CASE("unroll of an empty sequence is empty") {
  Rng rng(1);
  auto p = ModelParams<double>::init(4, 8, rng);
  auto seq = unroll(p, Tensor<double>(Shape::mat(0, 2)));
  CHECK(seq.steps() == 0);
}

TEST_CASE("unrolled states are nonnegative unit vectors") {
  Rng rng(123);
  for (int it = 0; it < 10; ++it) {
    auto p = ModelParams<double>::init(16, 24, rng);
    Tensor<double> v(Shape::mat(20, 2));
    for (auto& x : v.v) x = rng.uniform(-0.15, 0.15);
    auto seq = unroll(p, v);
    for (std::size_t t = 0; t < seq.steps(); ++t) {
      double s = 0;
      for (std::size_t i = 0; i < 16; ++i) {
        double x = seq.states.at(t, i);
        CHECK(x >= 0.0);
        s += x * x;
      }
      CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("degenerate unroll reports the offending step") {
  // Hidden layer passes vx through; W(v) = b3 + vx * w3-column. At vx=0 the
  // matrix is positive, at vx=1 it is uniformly negative.
  ModelParams<double> p;
  p.n_units = 2;
  p.hidden = 1;
  p.w1 = Tensor<double>::from(Shape::mat(1, 2), {1, 0});
  p.b1 = Tensor<double>(Shape::vec(1));
  p.w2 = Tensor<double>::from(Shape::mat(1, 1), {1});
  p.b2 = Tensor<double>(Shape::vec(1));
  p.w3 = Tensor<double>::from(Shape::mat(4, 1), {-2, -2, -2, -2});
  p.b3 = Tensor<double>::from(Shape::vec(4), {0.6, 0.1, 0.1, 0.6});
  p.g0 = Tensor<double>::from(Shape::vec(2), {std::sqrt(0.5), std::sqrt(0.5)});

  auto v = Tensor<double>::from(Shape::mat(3, 2), {0, 0, 0, 0, 1, 0});
  try {
    unroll(p, v);
    FAIL("expected DegenerateStateError");
  } catch (const DegenerateStateError& e) {
    CHECK(e.step() == 2);
  }
}

TEST_CASE("streaming unroll matches the one-shot unroll") {
  Rng rng(55);
  auto p = ModelParams<double>::init(12, 16, rng);
  Tensor<double> v(Shape::mat(57, 2));
  for (auto& x : v.v) x = rng.uniform(-0.15, 0.15);
  auto ref = unroll(p, v);
  Tensor<double> got(Shape::mat(57, 12));
  unroll_streaming(p, v, 10, [&](const Tensor<double>& chunk, std::size_t r0) {
    for (std::size_t t = 0; t < chunk.shape.rows(); ++t)
      for (std::size_t i = 0; i < 12; ++i)
        got.at(r0 + t, i) = chunk.at(t, i);
  });
  // GEMM accumulation order differs with the row-block size, so agreement is
  // to rounding, not bit-for-bit.
  double worst = 0;
  for (std::size_t i = 0; i < got.size(); ++i)
    worst = std::max(worst, std::abs(got.v[i] - ref.states.v[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("repeated velocity reuses one MLP evaluation") {
  Rng rng(9);
  auto p = ModelParams<double>::init(5, 8, rng);
  auto b = manual_batch({{0.1, 0.02}, {0.1, 0.02}, {-0.03, 0.0}});
  Graph<double> g;
  auto u = build_unroll(g, p, b, 1e-8);
  CHECK(u.distinct_velocities == 2);
  CHECK(u.state_ids.size() == 3);
}

TEST_CASE("graph unroll agrees with the plain unroll") {
  Rng rng(31);
  auto p = ModelParams<double>::init(10, 12, rng);
  Rng rng2(32);
  auto b = sample_batch(3, 8, rng2);
  Graph<double> g;
  auto u = build_unroll(g, p, b, 1e-8);
  for (std::size_t bb = 0; bb < 3; ++bb) {
    Tensor<double> v(Shape::mat(8, 2));
    for (std::size_t t = 0; t < 8; ++t) {
      v.at(t, 0) = b.vx(bb, t);
      v.at(t, 1) = b.vy(bb, t);
    }
    auto ref = unroll(p, v);
    for (std::size_t t = 0; t < 8; ++t) {
      const auto& st = g.value(u.state_ids[bb * 8 + t]);
      for (std::size_t i = 0; i < 10; ++i)
        CHECK(st[i] == doctest::Approx(ref.states.at(t, i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("every trainable tensor receives gradient through the unroll") {
  Rng rng(77);
  auto p = ModelParams<double>::init(6, 9, rng);
  Rng rng2(78);
  auto b = sample_batch(2, 5, rng2);
  Graph<double> g;
  auto u = build_unroll(g, p, b, 1e-8);
  // weight every state element so nothing cancels by construction
  Tensor<double> w(g.value(u.states).shape);
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = 0.3 + 0.01 * static_cast<double>(i % 17);
  auto root = g.sum(g.mul(u.states, g.constant(std::move(w))));
  g.backward(root);
  for (auto id : {u.leaf.w1, u.leaf.b1, u.leaf.w2, u.leaf.b2, u.leaf.w3,
                  u.leaf.b3}) {
    const auto* gr = g.grad_of(id);
    REQUIRE(gr != nullptr);
    double mx = 0;
    for (std::size_t i = 0; i < gr->size(); ++i)
      mx = std::max(mx, std::abs((*gr)[i]));
    CHECK(mx > 0.0);
  }
}

TEST_CASE("one-step commutation residual is symmetric and zero on the diagonal") {
  Rng rng(41);
  auto p = ModelParams<double>::init(8, 12, rng);
  Tensor<double> g0 = p.g0;
  double v1[2] = {0.1, -0.02}, v2[2] = {-0.05, 0.07};
  CHECK(commutation_residual(p, v1, v1, g0) == 0.0);
  CHECK(commutation_residual(p, v1, v2, g0) ==
        doctest::Approx(commutation_residual(p, v2, v1, g0)).epsilon(1e-15));
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(101);
  auto p = ModelParams<double>::init(7, 10, rng, true);
  Checkpoint c{p, 42, 777};
  std::string path = "ckpt_test.gsck";
  save_checkpoint(path, c);
  auto r = load_checkpoint(path);
  CHECK(r.updates == 42);
  CHECK(r.master_seed == 777);
  CHECK(r.params.train_g0 == true);
  CHECK(r.params.n_units == 7);
  CHECK(r.params.hidden == 10);
  auto orig = c.params.all();
  auto got = r.params.all();
  for (std::size_t i = 0; i < orig.size(); ++i)
    CHECK(bytes_equal(*orig[i], *got[i]));
  std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
  std::string path = "ckpt_bad.gsck";
  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fwrite("GSCK\x01\x00\x00\x00", 1, 8, f);
  std::fclose(f);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);

  f = std::fopen(path.c_str(), "wb");
  std::fwrite("WHAT", 1, 4, f);
  std::fclose(f);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  std::remove(path.c_str());
}
