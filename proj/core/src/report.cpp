#include "gridssl/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridssl/error.hpp"

namespace gridssl {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

void line(std::ostringstream& os, const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  os << buf << '\n';
}

void heading(std::ostringstream& os, const std::string& title) {
  os << '\n' << title << '\n' << std::string(title.size(), '-') << '\n';
}

void curve_section(std::ostringstream& os, const DistanceCurve& c,
                   const char* xlabel) {
  if (c.centers.empty()) {
    os << "(not computed)\n";
    return;
  }
  line(os, "%-12s %-12s %-12s %s", xlabel, "mean_dist", "mean_sqdist",
       "pairs");
  for (std::size_t i = 0; i < c.centers.size(); ++i)
    line(os, "%-12.6g %-12.6g %-12.6g %zu", c.centers[i], c.mean_dist[i],
         c.mean_sqdist[i], c.counts[i]);
}

}  // namespace

std::string format_report(const EvalResult& r) {
  std::ostringstream os;
  os << "gridssl evaluation report\n";
  os << "=========================\n";
  line(os, "source           : %s",
       r.from_model ? "trained model checkpoint" : "ideal-code oracle");
  if (r.from_model) {
    line(os, "checkpoint       : %llu updates, seed %llu",
         static_cast<unsigned long long>(r.checkpoint_updates),
         static_cast<unsigned long long>(r.checkpoint_seed));
  }
  line(os, "arena            : %.3g m square, %.4g m bins",
       r.config.arena_side, r.config.resolved_bin());
  line(os, "trajectory       : %zu steps, smoothness %.3g, speed cap %.3g m/step",
       r.config.eval_steps, r.config.smoothness, r.config.speed_max);
  line(os, "eval seed        : %llu",
       static_cast<unsigned long long>(r.config.seed));
  line(os, "units            : %zu", r.ratemaps.size());

  std::size_t n_dead = 0, n_classified = 0, n_scored = 0;
  for (const auto& s : r.summaries) {
    if (s.dead) ++n_dead;
    if (s.classified) ++n_classified;
  }
  for (const auto& s : r.scores)
    if (s.defined) ++n_scored;
  line(os, "dead units       : %zu", n_dead);
  line(os, "grid-classified  : %zu", n_classified);
  line(os, "gridness defined : %zu", n_scored);

  heading(os, "Per-unit spectral summary");
  line(os, "%-5s %-6s %-9s %-11s %-9s %-22s %s", "unit", "state", "period_m",
       "orient_deg", "gridness", "phase(rad)", "peak_k(cyc/m)");
  for (std::size_t u = 0; u < r.summaries.size(); ++u) {
    const auto& s = r.summaries[u];
    const char* state = s.dead ? "dead" : (s.classified ? "grid" : "other");
    char gbuf[16];
    if (u < r.scores.size() && r.scores[u].defined)
      std::snprintf(gbuf, sizeof gbuf, "%.3f", r.scores[u].score);
    else
      std::snprintf(gbuf, sizeof gbuf, "-");
    if (s.classified) {
      char pbuf[64], kbuf[48];
      std::snprintf(pbuf, sizeof pbuf, "%.3f %.3f %.3f", s.phase[0],
                    s.phase[1], s.phase[2]);
      std::snprintf(kbuf, sizeof kbuf, "(%.2f,%.2f) (%.2f,%.2f)", s.k1[0],
                    s.k1[1], s.k2[0], s.k2[1]);
      line(os, "%-5zu %-6s %-9.4f %-11.2f %-9s %-22s %s", u, state, s.period,
           s.orientation * kRadToDeg, gbuf, pbuf, kbuf);
    } else {
      line(os, "%-5zu %-6s %-9s %-11s %-9s", u, state, "-", "-", gbuf);
    }
  }

  heading(os, "Module clusters");
  os << "members >= 2, period tolerance 10%, orientation tolerance 5 deg\n";
  if (r.modules.modules.empty()) {
    os << "(no clusters)\n";
  } else {
    line(os, "%-7s %-6s %-9s %-11s %-15s %s", "module", "units", "period_m",
         "orient_deg", "phase_resultant", "phases_uniform");
    for (std::size_t m = 0; m < r.modules.modules.size(); ++m) {
      const auto& mod = r.modules.modules[m];
      char rbuf[48];
      std::snprintf(rbuf, sizeof rbuf, "%.2f %.2f %.2f",
                    mod.phase_resultant[0], mod.phase_resultant[1],
                    mod.phase_resultant[2]);
      line(os, "%-7zu %-6zu %-9.4f %-11.2f %-15s %s", m, mod.units.size(),
           mod.mean_period, mod.mean_orientation * kRadToDeg, rbuf,
           mod.phases_uniform ? "yes" : "no");
    }
  }
  line(os, "unclassified units outside any cluster: %zu",
       r.modules.n_unclassified);

  heading(os, "Toroidal structure per module");
  if (r.torus.empty()) {
    os << "(no modules)\n";
  } else {
    line(os, "%-7s %-8s %-9s %s", "module", "ran", "flagged",
         "ringness / coverage per phase axis");
    for (std::size_t m = 0; m < r.torus.size(); ++m) {
      if (!r.torus_ran[m]) {
        line(os, "%-7zu %-8s", m, "no");
        continue;
      }
      const auto& t = r.torus[m];
      char buf[128];
      std::snprintf(buf, sizeof buf,
                    "%.3f/%.2f%s  %.3f/%.2f%s  %.3f/%.2f%s",
                    t.rings[0].ringness, t.rings[0].coverage,
                    t.rings[0].degenerate ? "*" : "", t.rings[1].ringness,
                    t.rings[1].coverage, t.rings[1].degenerate ? "*" : "",
                    t.rings[2].ringness, t.rings[2].coverage,
                    t.rings[2].degenerate ? "*" : "");
      line(os, "%-7zu %-8s %-9s %s   (%zu samples embedded)", m, "yes",
           t.flagged ? "yes" : "no", buf,
           t.samples_embedded);
    }
    os << "(* = degenerate projection)\n";
  }

  heading(os, "Neural distance vs. spatial separation");
  curve_section(os, r.spatial, "sep_m");

  heading(os, "Neural distance vs. temporal lag");
  curve_section(os, r.temporal, "lag_steps");

  heading(os, "Sampled pair-distance distribution (positions)");
  if (r.pair_cdf.empty()) {
    os << "(not computed)\n";
  } else {
    line(os, "pairs: %zu", r.pair_cdf.size());
    static constexpr double kQ[] = {0.05, 0.25, 0.5, 0.75, 0.95};
    for (double q : kQ) {
      const auto idx = static_cast<std::size_t>(
          q * static_cast<double>(r.pair_cdf.size() - 1));
      line(os, "q%02d distance: %.4f m", static_cast<int>(q * 100),
           r.pair_cdf[idx]);
    }
  }

  if (r.from_model) {
    heading(os, "Update-order commutation residual");
    line(os, "pairs sampled : %zu", r.commutation.pairs);
    line(os, "mean residual : %.6g", r.commutation.mean);
    line(os, "max residual  : %.6g", r.commutation.max);
  }

  os << '\n';
  return os.str();
}

void write_report(const std::string& path, const EvalResult& result) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open report file: " + path);
  f << format_report(result);
  if (!f) throw IoError("short write: " + path);
}

}  // namespace gridssl
