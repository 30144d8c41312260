#include "gridssl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "gridssl/error.hpp"
#include "gridssl/fft.hpp"

namespace gridssl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTau = 2.0 * std::numbers::pi;

double wrap_pm_pi(double a) { return std::atan2(std::sin(a), std::cos(a)); }

struct PearsonAcc {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  std::size_t n = 0;
  void add(double x, double y) {
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    ++n;
  }
  double corr() const {
    const double nn = static_cast<double>(n);
    const double vx = nn * sxx - sx * sx, vy = nn * syy - sy * sy;
    if (vx <= 0 || vy <= 0) return kNaN;
    return (nn * sxy - sx * sy) / std::sqrt(vx * vy);
  }
};

}  // namespace

double wrap_angle(double a, double period) {
  double r = std::fmod(a, period);
  return r < 0 ? r + period : r;
}

Tensor<double> autocorrelogram(const Ratemap& map, std::size_t min_overlap) {
  const std::size_t ny = map.ny, nx = map.nx;
  Tensor<double> m(Shape::mat(ny, nx)), x(Shape::mat(ny, nx)),
      x2(Shape::mat(ny, nx));
  double sum = 0, sumsq = 0;
  std::size_t nv = 0;
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix) {
      if (!map.valid(iy, ix)) continue;
      const double v = map.values.at(iy, ix);
      m.at(iy, ix) = 1.0;
      x.at(iy, ix) = v;
      x2.at(iy, ix) = v * v;
      sum += v;
      sumsq += v * v;
      ++nv;
    }
  if (2 * nv < ny * nx)
    throw NumericError("autocorrelogram: fewer than half the bins are valid");
  // two-pass variance: the one-pass form cancels to rounding noise on a
  // constant map and would slip past the threshold below
  const double mean = sum / static_cast<double>(nv);
  double var = 0;
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix)
      if (map.valid(iy, ix)) {
        const double d = map.values.at(iy, ix) - mean;
        var += d * d;
      }
  var /= static_cast<double>(nv);
  if (var <= 1e-12 * (sumsq / static_cast<double>(nv)))
    throw NumericError("autocorrelogram: constant map has no correlation");

  const auto mm = cross_correlate(m, m);
  const auto xx = cross_correlate(x, x);
  const auto xm = cross_correlate(x, m);
  const auto x2m = cross_correlate(x2, m);

  const std::size_t R = 2 * ny - 1, C = 2 * nx - 1;
  Tensor<double> out(Shape::mat(R, C));
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      // correlating B against A at -d supplies the mirrored sums
      const std::size_t rr = R - 1 - r, cc = C - 1 - c;
      const double n = std::round(mm.at(r, c));
      if (n < static_cast<double>(min_overlap)) {
        out.at(r, c) = kNaN;
        continue;
      }
      const double sx = xm.at(r, c), sy = xm.at(rr, cc);
      const double sxx = x2m.at(r, c), syy = x2m.at(rr, cc);
      const double vx = n * sxx - sx * sx, vy = n * syy - sy * sy;
      const double floor = 1e-8 * n * n * var;
      if (vx <= floor || vy <= floor) {
        out.at(r, c) = kNaN;
        continue;
      }
      const double corr = (n * xx.at(r, c) - sx * sy) / std::sqrt(vx * vy);
      out.at(r, c) = std::clamp(corr, -1.0, 1.0);
    }
  return out;
}

std::vector<std::array<double, 2>> correlogram_peaks(
    const Tensor<double>& acorr, double min_value) {
  const std::size_t R = acorr.shape.rows(), C = acorr.shape.dim(1);
  const double cy = static_cast<double>((R - 1) / 2),
               cx = static_cast<double>((C - 1) / 2);
  std::vector<std::array<double, 2>> peaks;
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      const double v = acorr.at(r, c);
      if (std::isnan(v) || v < min_value) continue;
      const double dy = static_cast<double>(r) - cy,
                   dx = static_cast<double>(c) - cx;
      if (dy * dy + dx * dx < 4.0) continue;  // central peak
      bool is_peak = true, above_one = false;
      for (int oy = -1; oy <= 1 && is_peak; ++oy)
        for (int ox = -1; ox <= 1; ++ox) {
          if (oy == 0 && ox == 0) continue;
          const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(r) + oy;
          const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(c) + ox;
          if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(R) ||
              nc >= static_cast<std::ptrdiff_t>(C))
            continue;
          const double nb = acorr.at(static_cast<std::size_t>(nr),
                                     static_cast<std::size_t>(nc));
          if (std::isnan(nb)) continue;
          if (v < nb) {
            is_peak = false;
            break;
          }
          if (v > nb) above_one = true;
        }
      if (is_peak && above_one) peaks.push_back({dy, dx});
    }
  std::sort(peaks.begin(), peaks.end(),
            [](const auto& a, const auto& b) {
              return a[0] * a[0] + a[1] * a[1] < b[0] * b[0] + b[1] * b[1];
            });
  return peaks;
}

GridScore grid_score(const Tensor<double>& acorr) {
  GridScore gs;
  const auto peaks = correlogram_peaks(acorr, 0.1);
  if (peaks.empty()) return gs;

  const double r0 = std::hypot(peaks[0][0], peaks[0][1]);
  double ring = 0;
  std::size_t nring = 0;
  for (const auto& p : peaks) {
    const double r = std::hypot(p[0], p[1]);
    if (r >= 0.7 * r0 && r <= 1.3 * r0) {
      ring += r;
      ++nring;
    }
  }
  ring /= static_cast<double>(nring);
  gs.ring_radius = ring;

  const std::size_t R = acorr.shape.rows(), C = acorr.shape.dim(1);
  const double cy = static_cast<double>((R - 1) / 2),
               cx = static_cast<double>((C - 1) / 2);
  const double rin = 0.5 * ring, rout = 1.5 * ring;
  // the full annulus must fit inside the correlogram; "rings" any further
  // out are thin-overlap edge artifacts, not a detectable first ring
  if (rout > std::min(cy, cx)) return gs;

  struct Pt {
    double dy, dx, v;
  };
  std::vector<Pt> annulus;
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      const double v = acorr.at(r, c);
      if (std::isnan(v)) continue;
      const double dy = static_cast<double>(r) - cy,
                   dx = static_cast<double>(c) - cx;
      const double rad = std::hypot(dy, dx);
      if (rad >= rin && rad <= rout) annulus.push_back({dy, dx, v});
    }

  auto bilinear = [&](double fy, double fx, double& out) -> bool {
    if (fy < 0 || fx < 0 || fy > static_cast<double>(R - 1) ||
        fx > static_cast<double>(C - 1))
      return false;
    const std::size_t iy = std::min(static_cast<std::size_t>(fy), R - 2);
    const std::size_t ix = std::min(static_cast<std::size_t>(fx), C - 2);
    const double ty = fy - static_cast<double>(iy),
                 tx = fx - static_cast<double>(ix);
    const double v00 = acorr.at(iy, ix), v01 = acorr.at(iy, ix + 1);
    const double v10 = acorr.at(iy + 1, ix), v11 = acorr.at(iy + 1, ix + 1);
    if (std::isnan(v00) || std::isnan(v01) || std::isnan(v10) ||
        std::isnan(v11))
      return false;
    out = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
          ty * ((1 - tx) * v10 + tx * v11);
    return true;
  };

  double rot_corr[5];
  const double degs[5] = {30, 60, 90, 120, 150};
  for (int a = 0; a < 5; ++a) {
    const double ang = degs[a] * std::numbers::pi / 180.0;
    const double ca = std::cos(ang), sa = std::sin(ang);
    PearsonAcc acc;
    for (const auto& p : annulus) {
      const double ry = p.dx * sa + p.dy * ca, rx = p.dx * ca - p.dy * sa;
      double v;
      if (bilinear(cy + ry, cx + rx, v)) acc.add(p.v, v);
    }
    if (acc.n < 30) return gs;  // not enough annulus overlap: undefined
    rot_corr[a] = acc.corr();
    if (std::isnan(rot_corr[a])) return gs;
  }
  gs.score = std::min(rot_corr[1], rot_corr[3]) -
             std::max({rot_corr[0], rot_corr[2], rot_corr[4]});
  gs.defined = true;
  return gs;
}

namespace {

struct SpectralField {
  std::vector<double> px, py, val;  // valid bins: physical centers, centered value
};

SpectralField gather_centered(const Ratemap& map) {
  SpectralField f;
  double mean = 0;
  std::size_t nv = 0;
  for (std::size_t iy = 0; iy < map.ny; ++iy)
    for (std::size_t ix = 0; ix < map.nx; ++ix)
      if (map.valid(iy, ix)) {
        mean += map.values.at(iy, ix);
        ++nv;
      }
  if (nv == 0) return f;
  mean /= static_cast<double>(nv);
  f.px.reserve(nv);
  f.py.reserve(nv);
  f.val.reserve(nv);
  for (std::size_t iy = 0; iy < map.ny; ++iy)
    for (std::size_t ix = 0; ix < map.nx; ++ix)
      if (map.valid(iy, ix)) {
        f.px.push_back(map.x0 + (static_cast<double>(ix) + 0.5) * map.bin_size);
        f.py.push_back(map.y0 + (static_cast<double>(iy) + 0.5) * map.bin_size);
        f.val.push_back(map.values.at(iy, ix) - mean);
      }
  return f;
}

std::complex<double> dtft(const SpectralField& f, double fx, double fy) {
  std::complex<double> z(0, 0);
  for (std::size_t i = 0; i < f.val.size(); ++i) {
    const double ph = -kTau * (fx * f.px[i] + fy * f.py[i]);
    z += f.val[i] * std::complex<double>(std::cos(ph), std::sin(ph));
  }
  return z;
}

// Maximize |Z|^2 on successively finer 5x5 grids.
void refine_peak(const SpectralField& f, double& fx, double& fy, double step) {
  for (int level = 0; level < 3; ++level) {
    double bx = fx, by = fy, best = -1;
    for (int iy = -2; iy <= 2; ++iy)
      for (int ix = -2; ix <= 2; ++ix) {
        const double cx = fx + step * ix, cy = fy + step * iy;
        const double p = std::norm(dtft(f, cx, cy));
        if (p > best) {
          best = p;
          bx = cx;
          by = cy;
        }
      }
    fx = bx;
    fy = by;
    step /= 4.0;
  }
}

}  // namespace

UnitSpectralSummary fourier_summary(const Ratemap& map,
                                    const Tensor<double>* acorr) {
  UnitSpectralSummary s;
  s.unit = map.unit;
  s.dead = map.dead;
  if (map.dead) return s;

  try {
    const auto g =
        acorr && acorr->size() > 0 ? grid_score(*acorr)
                                   : grid_score(autocorrelogram(map));
    s.gridness = g.score;
    s.gridness_defined = g.defined;
  } catch (const NumericError&) {
  }

  const auto field = gather_centered(map);
  if (field.val.size() < 16) return s;

  // coarse spectrum on a padded grid (bin-indexed; frequencies in cycles/m)
  const std::size_t P = next_pow2(2 * std::max(map.nx, map.ny));
  std::vector<std::complex<double>> buf(P * P);
  {
    double mean = 0;
    std::size_t nv = 0;
    for (std::size_t iy = 0; iy < map.ny; ++iy)
      for (std::size_t ix = 0; ix < map.nx; ++ix)
        if (map.valid(iy, ix)) {
          mean += map.values.at(iy, ix);
          ++nv;
        }
    mean /= static_cast<double>(nv);
    for (std::size_t iy = 0; iy < map.ny; ++iy)
      for (std::size_t ix = 0; ix < map.nx; ++ix)
        if (map.valid(iy, ix))
          buf[iy * P + ix] = map.values.at(iy, ix) - mean;
  }
  fft_2d(buf, P, P, false);

  const double fstep = 1.0 / (static_cast<double>(P) * map.bin_size);
  auto freq_of = [&](std::size_t idx) {
    const auto half = static_cast<std::ptrdiff_t>(P / 2);
    auto si = static_cast<std::ptrdiff_t>(idx);
    if (si >= half) si -= static_cast<std::ptrdiff_t>(P);
    return static_cast<double>(si) * fstep;
  };

  // dominant peak, upper half-plane, away from DC
  double best = 0, bfx = 0, bfy = 0;
  for (std::size_t iy = 0; iy < P; ++iy)
    for (std::size_t ix = 0; ix < P; ++ix) {
      const double fy = freq_of(iy), fx = freq_of(ix);
      if (fy < 0 || (fy == 0 && fx <= 0)) continue;
      const double r_bins = std::hypot(fy, fx) / fstep;
      if (r_bins < 2.5) continue;
      const double p = std::norm(buf[iy * P + ix]);
      if (p > best) {
        best = p;
        bfx = fx;
        bfy = fy;
      }
    }
  if (best <= 0) return s;

  double k1x = bfx, k1y = bfy;
  refine_peak(field, k1x, k1y, fstep / 4.0);
  const double p1 = std::norm(dtft(field, k1x, k1y));
  const double k1n = std::hypot(k1x, k1y);

  // partner peak near k1 rotated +-120 degrees
  double k2x = 0, k2y = 0, p2 = -1;
  for (const double sgn : {1.0, -1.0}) {
    const double ang = sgn * 2.0 * std::numbers::pi / 3.0;
    const double px = k1x * std::cos(ang) - k1y * std::sin(ang);
    const double py = k1x * std::sin(ang) + k1y * std::cos(ang);
    // strongest spectrum bin within 3 bin-steps of the prediction
    double cb = -1, cfx = 0, cfy = 0;
    for (std::size_t iy = 0; iy < P; ++iy)
      for (std::size_t ix = 0; ix < P; ++ix) {
        const double fy = freq_of(iy), fx = freq_of(ix);
        if (std::hypot(fy - py, fx - px) > 3.0 * fstep) continue;
        const double p = std::norm(buf[iy * P + ix]);
        if (p > cb) {
          cb = p;
          cfx = fx;
          cfy = fy;
        }
      }
    if (cb < 0) continue;
    refine_peak(field, cfx, cfy, fstep / 4.0);
    const double pw = std::norm(dtft(field, cfx, cfy));
    const double kn = std::hypot(cfx, cfy);
    if (std::fabs(kn - k1n) > 0.15 * k1n) continue;
    if (pw < 0.05 * p1) continue;
    if (pw > p2) {
      p2 = pw;
      k2x = cfx;
      k2y = cfy;
    }
  }
  if (p2 < 0) return s;

  const double k3x = -(k1x + k2x), k3y = -(k1y + k2y);
  if (std::norm(dtft(field, k3x, k3y)) < 0.02 * p1) return s;

  const double fbar =
      (k1n + std::hypot(k2x, k2y) + std::hypot(k3x, k3y)) / 3.0;
  s.period = 2.0 / (std::sqrt(3.0) * fbar);

  // phases under the e^{+i k.x} convention; the transform above uses e^{-i},
  // so conjugate
  struct Member {
    double kx, ky, phi;
  };
  std::array<Member, 3> mem = {
      Member{k1x, k1y, wrap_pm_pi(-std::arg(dtft(field, k1x, k1y)))},
      Member{k2x, k2y, wrap_pm_pi(-std::arg(dtft(field, k2x, k2y)))},
      Member{k3x, k3y, 0.0}};
  mem[2].phi = wrap_pm_pi(-mem[0].phi - mem[1].phi);

  // Canonical form so every unit of a module reports the same axes in the
  // same order (phases pooled across units must line up): a global sign flip
  // (legal: it negates all three phases together) puts one wavevector in the
  // first sextant, then members are sorted by angle.
  const auto ang = [](const Member& m) {
    return wrap_angle(std::atan2(m.ky, m.kx), kTau);
  };
  bool sextant = false;
  for (const auto& m : mem) sextant = sextant || ang(m) < kTau / 6.0;
  if (!sextant)
    for (auto& m : mem) {
      m.kx = -m.kx;
      m.ky = -m.ky;
      m.phi = -m.phi;
    }
  std::sort(mem.begin(), mem.end(),
            [&](const Member& a, const Member& b) { return ang(a) < ang(b); });

  s.orientation = wrap_angle(ang(mem[0]) + std::numbers::pi / 6.0,
                             std::numbers::pi / 3.0);
  // the third phase closes the zero-sum triple exactly
  s.phase[0] = wrap_pm_pi(mem[0].phi);
  s.phase[1] = wrap_pm_pi(mem[1].phi);
  s.phase[2] = wrap_pm_pi(-s.phase[0] - s.phase[1]);
  s.k1 = {mem[0].kx, mem[0].ky};
  s.k2 = {mem[1].kx, mem[1].ky};
  s.classified = true;
  return s;
}

}  // namespace gridssl
