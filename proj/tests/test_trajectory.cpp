#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "gridssl/error.hpp"
#include "gridssl/trajectory.hpp"
#include "testutil.hpp"

using namespace gridssl;

TEST_CASE("single-step batch puts every trajectory at origin plus v1") {
  Rng rng(3);
  auto b = sample_batch(8, 1, rng);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(b.positions.at(i, 0, 0) == b.base_velocities.at(0, 0));
    CHECK(b.positions.at(i, 0, 1) == b.base_velocities.at(0, 1));
  }
}

TEST_CASE("permuted trajectories share start and endpoint") {
  Rng rng(17);
  auto b = sample_batch(130, 60, rng);
  double ex = b.positions.at(0, 59, 0), ey = b.positions.at(0, 59, 1);
  double worst = 0.0;
  for (std::size_t i = 1; i < b.batch_size(); ++i) {
    worst = std::max(worst, std::hypot(b.positions.at(i, 59, 0) - ex,
                                       b.positions.at(i, 59, 1) - ey));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("same seed reproduces the batch exactly") {
  Rng r1(99), r2(99);
  auto a = sample_batch(6, 12, r1);
  auto b = sample_batch(6, 12, r2);
  CHECK(testutil::bytes_equal(a.positions, b.positions));
  CHECK(testutil::bytes_equal(a.base_velocities, b.base_velocities));
  CHECK(a.permutations == b.permutations);
}

TEST_CASE("integrate_positions cumulative sums") {
  auto v = Tensor<double>::from(Shape::mat(2, 2), {1, 0, 0, 1});
  auto p = integrate_positions(v);
  CHECK(p.at(0, 0) == 1.0);
  CHECK(p.at(0, 1) == 0.0);
  CHECK(p.at(1, 0) == 1.0);
  CHECK(p.at(1, 1) == 1.0);

  auto z = integrate_positions(Tensor<double>(Shape::mat(5, 2)), {2.0, 3.0});
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(z.at(t, 0) == 2.0);
    CHECK(z.at(t, 1) == 3.0);
  }
}

TEST_CASE("component velocities stay inside the configured range") {
  Rng rng(4);
  auto b = sample_batch(100, 50, rng);
  double mn = 1e9, mx = -1e9, mean = 0;
  for (std::size_t t = 0; t < 50; ++t)
    for (int c = 0; c < 2; ++c) {
      double v = b.base_velocities.at(t, c);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
  Rng rng2(5);
  std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) mean += rng2.uniform(-0.15, 0.15);
  mean /= static_cast<double>(n);
  CHECK(mn > -0.15);
  CHECK(mx < 0.15);
  CHECK(std::abs(mean) < 2e-3);
}

TEST_CASE("pair masks classify planted geometry") {
  // four points: 0-1 coincident (near), 0-2 far, 0-3 exactly sigma_x apart
  auto pos = Tensor<double>::from(
      Shape::mat(4, 2), {0, 0, 0, 0, 0.2, 0, 0.05, 0});
  auto m = build_pair_masks(pos, 0.05);
  CHECK(m.is_near(0, 1));
  CHECK(m.is_near(1, 0));
  CHECK_FALSE(m.is_near(0, 2));
  CHECK_FALSE(m.is_near(0, 3));
  std::set<std::pair<std::uint32_t, std::uint32_t>> boundary(
      m.boundary_pairs.begin(), m.boundary_pairs.end());
  CHECK(boundary.count({0, 3}) == 1);
  CHECK(boundary.count({1, 3}) == 1);
  CHECK(m.total_pairs() == 6);
  CHECK(m.near_count() + m.far_count() + m.boundary_pairs.size() == 6);
  CHECK(m.near_count() + m.far_count() < m.total_pairs());
}

TEST_CASE("near plus far covers all pairs when nothing sits on the boundary") {
  Rng rng(12);
  auto b = sample_batch(5, 8, rng);
  auto m = build_pair_masks(b, 0.05);
  CHECK(m.boundary_pairs.empty());
  CHECK(m.near_count() + m.far_count() == m.total_pairs());
}

TEST_CASE("eval trajectory stays inside the arena") {
  Rng rng(8);
  auto t = sample_eval_trajectory(2.0, 0.7, 20000, rng);
  for (std::size_t i = 0; i < t.steps(); ++i) {
    CHECK(t.positions.at(i, 0) >= 0.0);
    CHECK(t.positions.at(i, 0) <= 2.0);
    CHECK(t.positions.at(i, 1) >= 0.0);
    CHECK(t.positions.at(i, 1) <= 2.0);
  }
  // displacements integrate back to positions
  double x = 1.0, y = 1.0;
  double worst = 0;
  for (std::size_t i = 0; i < t.steps(); ++i) {
    x += t.velocities.at(i, 0);
    y += t.velocities.at(i, 1);
    worst = std::max({worst, std::abs(x - t.positions.at(i, 0)),
                      std::abs(y - t.positions.at(i, 1))});
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("eval trajectory covers the arena") {
  Rng rng(9);
  auto t = sample_eval_trajectory(2.0, 0.7, 1000000, rng);
  const std::size_t bins = 40;  // 5 cm
  std::vector<char> hit(bins * bins, 0);
  for (std::size_t i = 0; i < t.steps(); ++i) {
    auto bx = std::min<std::size_t>(
        bins - 1, static_cast<std::size_t>(t.positions.at(i, 0) / 0.05));
    auto by = std::min<std::size_t>(
        bins - 1, static_cast<std::size_t>(t.positions.at(i, 1) / 0.05));
    hit[bx * bins + by] = 1;
  }
  std::size_t covered = 0;
  for (char h : hit) covered += h;
  CHECK(static_cast<double>(covered) / (bins * bins) >= 0.95);
}

TEST_CASE("smoothness controls heading correlation") {
  auto mean_cos_turn = [](double s, std::uint64_t seed) {
    Rng rng(seed);
    auto t = sample_eval_trajectory(50.0, s, 100000, rng);  // huge arena: no walls
    double acc = 0;
    std::size_t n = 0;
    double prev = 0;
    for (std::size_t i = 0; i < t.steps(); ++i) {
      double vx = t.velocities.at(i, 0), vy = t.velocities.at(i, 1);
      double h = std::atan2(vy, vx);
      if (i > 0) {
        acc += std::cos(h - prev);
        ++n;
      }
      prev = h;
    }
    return acc / static_cast<double>(n);
  };
  CHECK(std::abs(mean_cos_turn(0.0, 21)) < 0.02);  // i.i.d. headings
  CHECK(mean_cos_turn(0.9, 22) > 0.9);             // slow turning
}

TEST_CASE("trajectory dump round-trips") {
  Rng rng(31);
  auto b = sample_batch(4, 7, rng);
  std::string path = "traj_test.gstj";
  write_trajectory_dump(path, b);
  auto d = read_trajectory_dump(path);
  CHECK(d.batch == 4);
  CHECK(d.steps == 7);
  CHECK(testutil::bytes_equal(d.positions, b.positions));
  for (std::size_t t = 0; t < 7; ++t) {
    CHECK(d.velocities.at(2, t, 0) == b.vx(2, t));
    CHECK(d.velocities.at(2, t, 1) == b.vy(2, t));
  }
  std::remove(path.c_str());
}

TEST_CASE("corrupt trajectory dump is rejected") {
  std::string path = "traj_bad.gstj";
  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fwrite("NOPE", 1, 4, f);
  std::fclose(f);
  CHECK_THROWS_AS(read_trajectory_dump(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("independent batches do not share endpoints") {
  Rng rng(40);
  auto b = sample_batch_independent(16, 30, rng);
  double spread = 0;
  for (std::size_t i = 1; i < 16; ++i)
    spread = std::max(spread,
                      std::hypot(b.positions.at(i, 29, 0) - b.positions.at(0, 29, 0),
                                 b.positions.at(i, 29, 1) - b.positions.at(0, 29, 1)));
  CHECK(spread > 0.1);
}
