#include "gridssl/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "gridssl/error.hpp"
#include "gridssl/io_util.hpp"

namespace gridssl {

double TrajectoryBatch::speed(std::size_t b, std::size_t t) const {
  double x = vx(b, t), y = vy(b, t);
  return std::sqrt(x * x + y * y);
}

Tensor<double> TrajectoryBatch::flat_positions() const {
  std::size_t B = batch_size(), T = steps();
  Tensor<double> out(Shape::mat(B * T, 2));
  std::memcpy(out.data(), positions.data(), B * T * 2 * sizeof(double));
  return out;
}

Tensor<double> integrate_positions(const Tensor<double>& velocities,
                                   std::array<double, 2> origin) {
  if (velocities.shape.rank() != 2 || velocities.shape.cols() != 2)
    throw ConfigError("integrate_positions: velocities must be (T,2)");
  std::size_t T = velocities.shape.rows();
  Tensor<double> pos(Shape::mat(T, 2));
  double x = origin[0], y = origin[1];
  for (std::size_t t = 0; t < T; ++t) {
    x += velocities.at(t, 0);
    y += velocities.at(t, 1);
    pos.at(t, 0) = x;
    pos.at(t, 1) = y;
  }
  return pos;
}

namespace {

Tensor<double> draw_velocities(std::size_t rows, Rng& rng,
                               const VelocityConfig& vc) {
  Tensor<double> v(Shape::mat(rows, 2));
  for (std::size_t t = 0; t < rows; ++t) {
    v.at(t, 0) = rng.uniform(vc.lo, vc.hi);
    v.at(t, 1) = rng.uniform(vc.lo, vc.hi);
  }
  return v;
}

}  // namespace

TrajectoryBatch sample_batch(std::size_t batch, std::size_t steps, Rng& rng,
                             const VelocityConfig& vc) {
  if (batch == 0 || steps == 0)
    throw ConfigError("sample_batch: batch and steps must be positive");
  TrajectoryBatch tb;
  tb.base_velocities = draw_velocities(steps, rng, vc);
  tb.permutations.reserve(batch);
  tb.positions = Tensor<double>(Shape::cube(batch, steps, 2));
  for (std::size_t b = 0; b < batch; ++b) {
    tb.permutations.push_back(rng.permutation(steps));
    double x = tb.origin[0], y = tb.origin[1];
    for (std::size_t t = 0; t < steps; ++t) {
      x += tb.base_velocities.at(tb.permutations[b][t], 0);
      y += tb.base_velocities.at(tb.permutations[b][t], 1);
      tb.positions.at(b, t, 0) = x;
      tb.positions.at(b, t, 1) = y;
    }
  }
  return tb;
}

TrajectoryBatch sample_batch_independent(std::size_t batch, std::size_t steps,
                                         Rng& rng, const VelocityConfig& vc) {
  if (batch == 0 || steps == 0)
    throw ConfigError("sample_batch: batch and steps must be positive");
  TrajectoryBatch tb;
  tb.independent = true;
  tb.independent_velocities = Tensor<double>(Shape::cube(batch, steps, 2));
  tb.positions = Tensor<double>(Shape::cube(batch, steps, 2));
  for (std::size_t b = 0; b < batch; ++b) {
    double x = tb.origin[0], y = tb.origin[1];
    for (std::size_t t = 0; t < steps; ++t) {
      double vx = rng.uniform(vc.lo, vc.hi);
      double vy = rng.uniform(vc.lo, vc.hi);
      tb.independent_velocities.at(b, t, 0) = vx;
      tb.independent_velocities.at(b, t, 1) = vy;
      x += vx;
      y += vy;
      tb.positions.at(b, t, 0) = x;
      tb.positions.at(b, t, 1) = y;
    }
  }
  return tb;
}

bool PairMask::is_near(std::uint32_t i, std::uint32_t j) const {
  if (i == j) return false;
  if (i > j) std::swap(i, j);
  return std::binary_search(near_pairs.begin(), near_pairs.end(),
                            std::make_pair(i, j));
}

PairMask build_pair_masks(const Tensor<double>& flat_positions,
                          double sigma_x) {
  if (flat_positions.shape.rank() != 2 || flat_positions.shape.cols() != 2)
    throw ConfigError("build_pair_masks: positions must be (n,2)");
  if (!(sigma_x > 0)) throw ConfigError("build_pair_masks: sigma_x must be > 0");
  PairMask m;
  m.n = flat_positions.shape.rows();
  m.sigma_x = sigma_x;
  const double s2 = sigma_x * sigma_x;
  const double* p = flat_positions.data();
  for (std::size_t i = 0; i < m.n; ++i) {
    double xi = p[2 * i], yi = p[2 * i + 1];
    for (std::size_t j = i + 1; j < m.n; ++j) {
      double dx = p[2 * j] - xi, dy = p[2 * j + 1] - yi;
      double d2 = dx * dx + dy * dy;
      if (d2 < s2)
        m.near_pairs.emplace_back(static_cast<std::uint32_t>(i),
                                  static_cast<std::uint32_t>(j));
      else if (d2 == s2)
        m.boundary_pairs.emplace_back(static_cast<std::uint32_t>(i),
                                      static_cast<std::uint32_t>(j));
    }
  }
  return m;
}

PairMask build_pair_masks(const TrajectoryBatch& batch, double sigma_x) {
  return build_pair_masks(batch.flat_positions(), sigma_x);
}

EvalTrajectory sample_eval_trajectory(double arena_side, double smoothness,
                                      std::size_t steps, Rng& rng,
                                      double speed_max) {
  if (!(arena_side > 0)) throw ConfigError("eval trajectory: arena_side <= 0");
  if (!(smoothness >= 0.0 && smoothness < 1.0))
    throw ConfigError("eval trajectory: smoothness must be in [0,1)");
  EvalTrajectory tr;
  tr.arena_side = arena_side;
  tr.positions = Tensor<double>(Shape::mat(steps, 2));
  tr.velocities = Tensor<double>(Shape::mat(steps, 2));
  const double pi = 3.14159265358979323846;
  double x = arena_side / 2, y = arena_side / 2;
  double theta = rng.uniform(-pi, pi);
  double turn = pi * (1.0 - smoothness);
  for (std::size_t t = 0; t < steps; ++t) {
    theta += rng.uniform(-turn, turn);
    if (theta > pi) theta -= 2 * pi;
    if (theta < -pi) theta += 2 * pi;
    double sp = rng.uniform(0.0, speed_max);
    double nx = x + sp * std::cos(theta);
    double ny = y + sp * std::sin(theta);
    for (int guard = 0; guard < 8; ++guard) {
      bool ok = true;
      if (nx < 0) { nx = -nx; theta = pi - theta; ok = false; }
      if (nx > arena_side) { nx = 2 * arena_side - nx; theta = pi - theta; ok = false; }
      if (ny < 0) { ny = -ny; theta = -theta; ok = false; }
      if (ny > arena_side) { ny = 2 * arena_side - ny; theta = -theta; ok = false; }
      if (ok) break;
    }
    nx = std::min(std::max(nx, 0.0), arena_side);
    ny = std::min(std::max(ny, 0.0), arena_side);
    tr.velocities.at(t, 0) = nx - x;
    tr.velocities.at(t, 1) = ny - y;
    tr.positions.at(t, 0) = nx;
    tr.positions.at(t, 1) = ny;
    x = nx;
    y = ny;
  }
  return tr;
}

namespace {

constexpr std::uint32_t kTrajVersion = 1;

void write_dump(const std::string& path, std::uint32_t B, std::uint32_t T,
                std::array<double, 2> origin, const double* pos,
                const double* vel) {
  FileWriter f(path);
  f.magic("GSTJ");
  f.u32(kTrajVersion);
  f.u32(B);
  f.u32(T);
  f.f64(origin[0]);
  f.f64(origin[1]);
  f.f64_array(pos, static_cast<std::size_t>(B) * T * 2);
  f.f64_array(vel, static_cast<std::size_t>(B) * T * 2);
}

}  // namespace

void write_trajectory_dump(const std::string& path,
                           const TrajectoryBatch& batch) {
  std::size_t B = batch.batch_size(), T = batch.steps();
  Tensor<double> vel(Shape::cube(B, T, 2));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      vel.at(b, t, 0) = batch.vx(b, t);
      vel.at(b, t, 1) = batch.vy(b, t);
    }
  write_dump(path, static_cast<std::uint32_t>(B), static_cast<std::uint32_t>(T),
             batch.origin, batch.positions.data(), vel.data());
}

void write_trajectory_dump(const std::string& path, const EvalTrajectory& t) {
  write_dump(path, 1, static_cast<std::uint32_t>(t.steps()),
             {t.positions.at(0, 0) - t.velocities.at(0, 0),
              t.positions.at(0, 1) - t.velocities.at(0, 1)},
             t.positions.data(), t.velocities.data());
}

TrajectoryDump read_trajectory_dump(const std::string& path) {
  FileReader f(path);
  f.expect_magic("GSTJ", "trajectory dump");
  std::uint32_t version = f.u32();
  if (version != kTrajVersion)
    throw IoError(path + ": unsupported trajectory dump version " +
                  std::to_string(version));
  TrajectoryDump d;
  d.batch = f.u32();
  d.steps = f.u32();
  if (d.batch == 0 || d.steps == 0 ||
      static_cast<std::uint64_t>(d.batch) * d.steps > (1ull << 32))
    throw IoError(path + ": implausible trajectory dump header");
  d.origin[0] = f.f64();
  d.origin[1] = f.f64();
  d.positions = Tensor<double>(Shape::cube(d.batch, d.steps, 2));
  d.velocities = Tensor<double>(Shape::cube(d.batch, d.steps, 2));
  f.f64_array(d.positions.data(), d.positions.size());
  f.f64_array(d.velocities.data(), d.velocities.size());
  f.expect_eof("trajectory dump");
  return d;
}

}  // namespace gridssl
