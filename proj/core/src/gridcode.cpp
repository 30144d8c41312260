#include "gridssl/gridcode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gridssl/error.hpp"

namespace gridssl {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

double wrap_unit(double u) {
  double f = std::fmod(u, 1.0);
  return f < 0 ? f + 1.0 : f;
}

}  // namespace

std::array<double, 2> IdealModule::a1() const {
  return {lambda * std::cos(theta), lambda * std::sin(theta)};
}

std::array<double, 2> IdealModule::a2() const {
  // 60 degrees on from a1 for hex, 90 for square
  const double step = lattice == Lattice::hex ? std::numbers::pi / 3
                                              : std::numbers::pi / 2;
  return {lambda * std::cos(theta + step), lambda * std::sin(theta + step)};
}

IdealModule make_module(double lambda, double theta, std::size_t cells_axis,
                        double r_max, Lattice lattice) {
  if (!(lambda > 0)) throw ConfigError("module period must be positive");
  if (cells_axis == 0) throw ConfigError("cells_axis must be positive");
  IdealModule m;
  m.lambda = lambda;
  m.theta = theta;
  m.r_max = r_max;
  m.lattice = lattice;
  m.phases = Tensor<double>(Shape::mat(cells_axis * cells_axis, 2));
  const double step = kTau / static_cast<double>(cells_axis);
  for (std::size_t p = 0; p < cells_axis; ++p)
    for (std::size_t q = 0; q < cells_axis; ++q) {
      m.phases.at(p * cells_axis + q, 0) = step * static_cast<double>(p);
      m.phases.at(p * cells_axis + q, 1) = step * static_cast<double>(q);
    }
  return m;
}

std::array<double, 2> lattice_coords(const IdealModule& m, double x, double y) {
  const auto v1 = m.a1(), v2 = m.a2();
  // Solve A u = x by the closed form. The determinant and the numerators are
  // built from identical product expressions, so u is exact for x on the
  // lattice axes (e.g. x = a1 gives exactly (1, 0)).
  const double det = v1[0] * v2[1] - v2[0] * v1[1];
  const double u1 = (x * v2[1] - v2[0] * y) / det;
  const double u2 = (v1[0] * y - x * v1[1]) / det;
  return {wrap_unit(u1), wrap_unit(u2)};
}

std::array<double, 2> phase_of_position(const IdealModule& m, double x,
                                        double y) {
  const auto u = lattice_coords(m, x, y);
  return {kTau * u[0], kTau * u[1]};
}

Tensor<double> rate_1d(const IdealModule& m, double x) {
  Tensor<double> out(Shape::vec(m.cells()));
  const double u = wrap_unit(x / m.lambda);
  for (std::size_t i = 0; i < m.cells(); ++i) {
    const double c = std::cos(kTau * u + m.phases.at(i, 0));
    out.v[i] = c > 0 ? m.r_max * c : 0.0;
  }
  return out;
}

void module_rates(const IdealModule& m, double x, double y, double* out) {
  const auto u = lattice_coords(m, x, y);
  const double t1 = kTau * u[0], t2 = kTau * u[1];
  const bool hex = m.lattice == Lattice::hex;
  for (std::size_t i = 0; i < m.cells(); ++i) {
    const double a1 = t1 - m.phases.at(i, 0);
    const double a2 = t2 - m.phases.at(i, 1);
    double s = std::cos(a1) + std::cos(a2);
    if (hex) s += std::cos(a1 + a2);
    out[i] = s > 0 ? m.r_max * s : 0.0;
  }
}

Tensor<double> rate_2d(const IdealModule& m, double x, double y) {
  Tensor<double> out(Shape::vec(m.cells()));
  module_rates(m, x, y, out.data());
  return out;
}

std::size_t IdealCode::cells() const {
  std::size_t n = 0;
  for (const auto& m : modules) n += m.cells();
  return n;
}

void IdealCode::validate() const {
  if (modules.empty()) throw ConfigError("code needs at least one module");
  for (std::size_t i = 0; i < modules.size(); ++i)
    for (std::size_t j = i + 1; j < modules.size(); ++j)
      if (modules[i].lambda == modules[j].lambda)
        throw ConfigError("module periods must be pairwise distinct");
}

Tensor<double> code_state(const IdealCode& code, double x, double y,
                          bool normalize) {
  Tensor<double> out(Shape::vec(code.cells()));
  std::size_t off = 0;
  for (const auto& m : code.modules) {
    module_rates(m, x, y, out.data() + off);
    off += m.cells();
  }
  if (normalize) {
    double nsq = 0;
    for (double v : out.v) nsq += v * v;
    if (nsq <= 0) throw NumericError("code state has zero norm");
    const double inv = 1.0 / std::sqrt(nsq);
    for (double& v : out.v) v *= inv;
  }
  return out;
}

double mean_neural_distance(const IdealCode& code, double separation,
                            double arena_side, std::size_t n_pairs, Rng& rng,
                            bool normalize) {
  if (n_pairs == 0) throw ConfigError("n_pairs must be positive");
  double acc = 0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const double x = rng.uniform(0.0, arena_side);
    const double y = rng.uniform(0.0, arena_side);
    const double ang = rng.uniform(0.0, kTau);
    const auto a = code_state(code, x, y, normalize);
    const auto b = code_state(code, x + separation * std::cos(ang),
                              y + separation * std::sin(ang), normalize);
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double t = a.v[i] - b.v[i];
      d += t * t;
    }
    acc += std::sqrt(d);
  }
  return acc / static_cast<double>(n_pairs);
}

CodingDiagnostics coding_diagnostics(const IdealCode& code, double arena_side,
                                     double resolution, double threshold,
                                     std::uint64_t seed) {
  code.validate();
  if (!(arena_side > 0) || !(resolution > 0))
    throw ConfigError("arena and resolution must be positive");
  if (!(threshold > 0)) throw ConfigError("threshold must be positive");

  CodingDiagnostics d;
  const auto steps = static_cast<std::size_t>(arena_side / resolution) + 1;

  // distinguishable states: greedy net, one prefix at a time
  for (std::size_t pre = 1; pre <= code.modules.size(); ++pre) {
    IdealCode sub;
    sub.modules.assign(code.modules.begin(), code.modules.begin() + pre);
    std::vector<Tensor<double>> kept;
    for (std::size_t ix = 0; ix < steps; ++ix)
      for (std::size_t iy = 0; iy < steps; ++iy) {
        auto s = code_state(sub, resolution * static_cast<double>(ix),
                            resolution * static_cast<double>(iy), true);
        bool novel = true;
        for (const auto& k : kept) {
          double dist = 0;
          for (std::size_t i = 0; i < s.size(); ++i) {
            const double t = s.v[i] - k.v[i];
            dist += t * t;
          }
          if (std::sqrt(dist) < threshold) {
            novel = false;
            break;
          }
        }
        if (novel) kept.push_back(std::move(s));
      }
    d.states_per_prefix.push_back(kept.size());
  }

  // distance-vs-separation curve up to twice the largest period
  double lam_max = 0, lam_min = code.modules[0].lambda;
  for (const auto& m : code.modules) {
    lam_max = std::max(lam_max, m.lambda);
    lam_min = std::min(lam_min, m.lambda);
  }
  Rng rng(seed);
  const std::size_t bins = 24;
  for (std::size_t b = 1; b <= bins; ++b) {
    const double sep = 2.0 * lam_max * static_cast<double>(b) /
                       static_cast<double>(bins);
    d.separations.push_back(sep);
    d.mean_distance.push_back(
        mean_neural_distance(code, sep, arena_side, 200, rng));
  }

  // norm range over the grid
  d.min_norm = std::numeric_limits<double>::infinity();
  d.max_norm = 0;
  for (std::size_t ix = 0; ix < steps; ++ix)
    for (std::size_t iy = 0; iy < steps; ++iy) {
      auto s = code_state(code, resolution * static_cast<double>(ix),
                          resolution * static_cast<double>(iy), true);
      double nsq = 0;
      for (double v : s.v) nsq += v * v;
      const double n = std::sqrt(nsq);
      d.min_norm = std::min(d.min_norm, n);
      d.max_norm = std::max(d.max_norm, n);
    }
  return d;
}

}  // namespace gridssl
