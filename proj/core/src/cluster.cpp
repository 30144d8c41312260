#include "gridssl/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gridssl {

namespace {

constexpr double kSixty = std::numbers::pi / 3.0;

double orient_dist(double a, double b) {
  const double d = wrap_angle(a - b, kSixty);
  return std::min(d, kSixty - d);
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

ModuleReport cluster_modules(const std::vector<UnitSpectralSummary>& summaries,
                             double period_tol, double orient_tol_deg) {
  ModuleReport rep;
  rep.assignment.assign(summaries.size(), ModuleReport::kUnclassified);

  std::vector<std::size_t> idx;  // classified summaries
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    if (summaries[i].dead) {
      rep.assignment[i] = ModuleReport::kDead;
      ++rep.n_dead;
    } else if (summaries[i].classified) {
      idx.push_back(i);
    }
  }

  const double log_tol = std::log(1.0 + period_tol);
  const double orient_tol = orient_tol_deg * std::numbers::pi / 180.0;
  UnionFind uf(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const auto& sa = summaries[idx[a]];
      const auto& sb = summaries[idx[b]];
      if (std::fabs(std::log(sa.period / sb.period)) > log_tol) continue;
      if (orient_dist(sa.orientation, sb.orientation) > orient_tol) continue;
      uf.unite(a, b);
    }

  // gather clusters of size >= 2
  std::vector<std::vector<std::size_t>> groups;  // summary indices
  {
    std::vector<std::size_t> roots(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) roots[a] = uf.find(a);
    for (std::size_t a = 0; a < idx.size(); ++a) {
      if (roots[a] != a) continue;
      std::vector<std::size_t> g;
      for (std::size_t b = 0; b < idx.size(); ++b)
        if (roots[b] == a) g.push_back(idx[b]);
      if (g.size() >= 2) groups.push_back(std::move(g));
    }
  }

  for (auto& g : groups) {
    ModuleStats st;
    double psum = 0, c6 = 0, s6 = 0;
    std::array<double, 2> re = {0, 0}, im = {0, 0};
    double re3 = 0, im3 = 0;
    for (std::size_t i : g) {
      const auto& s = summaries[i];
      st.units.push_back(s.unit);
      psum += s.period;
      c6 += std::cos(6.0 * s.orientation);
      s6 += std::sin(6.0 * s.orientation);
      re[0] += std::cos(s.phase[0]);
      im[0] += std::sin(s.phase[0]);
      re[1] += std::cos(s.phase[1]);
      im[1] += std::sin(s.phase[1]);
      re3 += std::cos(s.phase[2]);
      im3 += std::sin(s.phase[2]);
    }
    const double n = static_cast<double>(g.size());
    st.mean_period = psum / n;
    st.mean_orientation = wrap_angle(std::atan2(s6, c6) / 6.0, kSixty);
    st.phase_resultant[0] = std::hypot(re[0], im[0]) / n;
    st.phase_resultant[1] = std::hypot(re[1], im[1]) / n;
    st.phase_resultant[2] = std::hypot(re3, im3) / n;
    // Rayleigh: under uniformity n*R^2 is approximately Exp(1)
    const double crit = std::log(3.0 / 0.05);
    double worst = 0;
    for (double r : st.phase_resultant) worst = std::max(worst, n * r * r);
    st.phases_uniform = worst < crit;
    rep.modules.push_back(std::move(st));
  }

  std::sort(rep.modules.begin(), rep.modules.end(),
            [](const ModuleStats& a, const ModuleStats& b) {
              return a.mean_period < b.mean_period;
            });
  for (std::size_t m = 0; m < rep.modules.size(); ++m)
    for (std::size_t u : rep.modules[m].units)
      for (std::size_t i = 0; i < summaries.size(); ++i)
        if (summaries[i].unit == u && rep.assignment[i] != ModuleReport::kDead)
          rep.assignment[i] = static_cast<int>(m);

  for (std::size_t i = 0; i < summaries.size(); ++i)
    rep.n_unclassified += rep.assignment[i] == ModuleReport::kUnclassified;
  return rep;
}

}  // namespace gridssl
