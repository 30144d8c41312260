#include "gridssl/ratemap.hpp"

#include <cmath>
#include <limits>

#include "gridssl/error.hpp"
#include "gridssl/io_util.hpp"

namespace gridssl {

namespace {

constexpr std::uint32_t kRatemapVersion = 1;

std::size_t bins_for(double span, double bin_size) {
  if (!(bin_size > 0)) throw ConfigError("ratemap: bin_size must be positive");
  if (!(span > 0)) throw ConfigError("ratemap: empty arena box");
  return static_cast<std::size_t>(std::ceil(span / bin_size - 1e-9));
}

}  // namespace

double Ratemap::fraction_valid() const {
  if (occupancy.empty()) return 0.0;
  std::size_t n = 0;
  for (auto c : occupancy) n += c >= min_occupancy;
  return static_cast<double>(n) / static_cast<double>(occupancy.size());
}

RatemapAccumulator::RatemapAccumulator(std::size_t n_units, double x0,
                                       double y0, double x1, double y1,
                                       double bin_size,
                                       std::uint32_t min_occupancy)
    : n_units_(n_units),
      nx_(bins_for(x1 - x0, bin_size)),
      ny_(bins_for(y1 - y0, bin_size)),
      x0_(x0),
      y0_(y0),
      x1_(x1),
      y1_(y1),
      bin_size_(bin_size),
      min_occupancy_(min_occupancy) {
  if (n_units_ == 0) throw ConfigError("ratemap: no units");
  sums_.assign(n_units_ * nx_ * ny_, 0.0);
  counts_.assign(nx_ * ny_, 0);
  peak_.assign(n_units_, 0.0);
}

void RatemapAccumulator::add(double x, double y, const double* acts) {
  if (x < x0_ || x > x1_ || y < y0_ || y > y1_) return;
  std::size_t ix = static_cast<std::size_t>((x - x0_) / bin_size_);
  std::size_t iy = static_cast<std::size_t>((y - y0_) / bin_size_);
  if (ix >= nx_) ix = nx_ - 1;  // right/top edges fold into the last bin
  if (iy >= ny_) iy = ny_ - 1;
  const std::size_t bin = iy * nx_ + ix;
  const std::size_t nbins = nx_ * ny_;
  ++counts_[bin];
  ++binned_;
  for (std::size_t u = 0; u < n_units_; ++u) {
    sums_[u * nbins + bin] += acts[u];
    if (acts[u] > peak_[u]) peak_[u] = acts[u];
  }
}

std::vector<Ratemap> RatemapAccumulator::finalize() const {
  const std::size_t nbins = nx_ * ny_;
  std::vector<Ratemap> maps(n_units_);
  for (std::size_t u = 0; u < n_units_; ++u) {
    Ratemap& m = maps[u];
    m.unit = u;
    m.x0 = x0_;
    m.y0 = y0_;
    m.x1 = x1_;
    m.y1 = y1_;
    m.bin_size = bin_size_;
    m.nx = nx_;
    m.ny = ny_;
    m.min_occupancy = min_occupancy_;
    m.occupancy = counts_;
    m.values = Tensor<double>(Shape::mat(ny_, nx_));
    for (std::size_t b = 0; b < nbins; ++b)
      m.values.v[b] = counts_[b] == 0
                          ? std::numeric_limits<double>::quiet_NaN()
                          : sums_[u * nbins + b] /
                                static_cast<double>(counts_[b]);
    m.dead = peak_[u] < kDeadRate;
  }
  return maps;
}

std::vector<Ratemap> compute_ratemaps(const ModelParams<double>& params,
                                      const EvalTrajectory& traj,
                                      double bin_size,
                                      std::uint32_t min_occupancy,
                                      std::size_t chunk) {
  const std::size_t n = params.g0.size();
  RatemapAccumulator acc(n, 0.0, 0.0, traj.arena_side, traj.arena_side,
                         bin_size, min_occupancy);
  unroll_streaming(params, traj.velocities, chunk,
                   [&](const Tensor<double>& states, std::size_t row0) {
                     for (std::size_t r = 0; r < states.shape.rows(); ++r)
                       acc.add(traj.positions.at(row0 + r, 0),
                               traj.positions.at(row0 + r, 1),
                               states.data() + r * n);
                   });
  return acc.finalize();
}

std::vector<Ratemap> compute_oracle_ratemaps(const IdealCode& code,
                                             const EvalTrajectory& traj,
                                             double bin_size,
                                             std::uint32_t min_occupancy,
                                             bool normalize) {
  code.validate();
  RatemapAccumulator acc(code.cells(), 0.0, 0.0, traj.arena_side,
                         traj.arena_side, bin_size, min_occupancy);
  for (std::size_t t = 0; t < traj.steps(); ++t) {
    const auto s = code_state(code, traj.positions.at(t, 0),
                              traj.positions.at(t, 1), normalize);
    acc.add(traj.positions.at(t, 0), traj.positions.at(t, 1), s.data());
  }
  return acc.finalize();
}

void write_ratemap(const std::string& path, const Ratemap& map) {
  FileWriter f(path);
  f.magic("GSRM");
  f.u32(kRatemapVersion);
  f.u32(static_cast<std::uint32_t>(map.unit));
  f.u32(static_cast<std::uint32_t>(map.nx));
  f.u32(static_cast<std::uint32_t>(map.ny));
  f.f64(map.bin_size);
  f.f64(map.x0);
  f.f64(map.y0);
  f.f64(map.x1);
  f.f64(map.y1);
  f.f64_array(map.values.data(), map.nx * map.ny);
  for (auto c : map.occupancy) f.u32(c);
}

Ratemap read_ratemap(const std::string& path) {
  FileReader f(path);
  f.expect_magic("GSRM", "ratemap");
  if (f.u32() != kRatemapVersion)
    throw IoError(path + ": unsupported ratemap version");
  Ratemap m;
  m.unit = f.u32();
  m.nx = f.u32();
  m.ny = f.u32();
  if (m.nx == 0 || m.ny == 0 || m.nx > (1u << 16) || m.ny > (1u << 16))
    throw IoError(path + ": implausible ratemap dimensions");
  m.bin_size = f.f64();
  m.x0 = f.f64();
  m.y0 = f.f64();
  m.x1 = f.f64();
  m.y1 = f.f64();
  m.values = Tensor<double>(Shape::mat(m.ny, m.nx));
  f.f64_array(m.values.data(), m.nx * m.ny);
  m.occupancy.resize(m.nx * m.ny);
  for (auto& c : m.occupancy) c = f.u32();
  f.expect_eof("ratemap");
  double peak = 0.0;
  for (std::size_t b = 0; b < m.occupancy.size(); ++b)
    if (m.occupancy[b] > 0 && m.values.v[b] > peak) peak = m.values.v[b];
  m.dead = peak < kDeadRate;
  return m;
}

}  // namespace gridssl
