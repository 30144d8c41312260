#include "gridssl/torus.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "gridssl/error.hpp"

namespace gridssl {

namespace {

constexpr std::size_t kSectors = 48;
constexpr double kCoverageFloor = 0.75;
constexpr std::size_t kPcaDims = 6;
constexpr std::size_t kEmbedDims = 3;

RingProjection ring_projection(const Tensor<double>& states,
                               const Tensor<double>& phases, std::size_t axis) {
  const std::size_t S = states.shape.rows(), N = states.shape.dim(1);
  RingProjection rp;
  rp.points = Tensor<double>(Shape::mat(S, 2));

  std::vector<double> cs(N), sn(N);
  for (std::size_t i = 0; i < N; ++i) {
    cs[i] = std::cos(phases.at(i, axis));
    sn[i] = std::sin(phases.at(i, axis));
  }

  double rsum = 0, rsq = 0;
  std::vector<bool> hit(kSectors, false);
  for (std::size_t s = 0; s < S; ++s) {
    const double* g = states.data() + s * N;
    double u = 0, v = 0;
    for (std::size_t i = 0; i < N; ++i) {
      u += cs[i] * g[i];
      v += sn[i] * g[i];
    }
    rp.points.at(s, 0) = u;
    rp.points.at(s, 1) = v;
    const double r = std::hypot(u, v);
    rsum += r;
    rsq += r * r;
    if (r > 0) {
      double frac = std::atan2(v, u) / (2.0 * std::numbers::pi);
      if (frac < 0) frac += 1.0;
      auto sec = static_cast<std::size_t>(frac * kSectors);
      if (sec >= kSectors) sec = kSectors - 1;
      hit[sec] = true;
    }
  }

  const double n = static_cast<double>(S);
  const double mean_r = rsum / n;
  const double var_r = std::max(0.0, rsq / n - mean_r * mean_r);
  std::size_t filled = 0;
  for (bool h : hit) filled += h;
  rp.coverage = static_cast<double>(filled) / static_cast<double>(kSectors);

  double peak = 0;
  for (std::size_t s = 0; s < S; ++s)
    peak = std::max(peak, std::hypot(rp.points.at(s, 0), rp.points.at(s, 1)));
  if (mean_r <= 1e-12 * std::max(1.0, peak)) {
    rp.ringness = 0.0;
    rp.degenerate = true;
    return rp;
  }
  rp.ringness = std::sqrt(var_r) / mean_r;
  rp.degenerate = rp.coverage < kCoverageFloor;
  return rp;
}

}  // namespace

TorusResult torus_analysis(const Tensor<double>& states,
                           const Tensor<double>& phases, std::size_t knn,
                           std::size_t max_embed, std::size_t min_samples) {
  const std::size_t S = states.shape.rows(), N = states.shape.dim(1);
  if (S < min_samples)
    throw ConfigError("torus analysis: not enough state samples");
  if (phases.shape.rows() != N || phases.shape.dim(1) != 3)
    throw ConfigError("torus analysis: phases must be (units, 3)");
  if (knn < 2 || max_embed <= knn)
    throw ConfigError("torus analysis: bad graph parameters");

  TorusResult res;

  // degenerate input: no variance anywhere
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      X(states.data(), static_cast<Eigen::Index>(S),
        static_cast<Eigen::Index>(N));
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const double total_var =
      (X.rowwise() - mean).squaredNorm() / static_cast<double>(S);
  const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
  if (total_var <= 1e-18 * scale * scale) {
    res.flagged = true;
    for (std::size_t a = 0; a < 3; ++a)
      res.rings[a] = ring_projection(states, phases, a);
    return res;
  }

  for (std::size_t a = 0; a < 3; ++a)
    res.rings[a] = ring_projection(states, phases, a);

  // PCA to 6 dims
  const std::size_t pdims = std::min(kPcaDims, N);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                                              static_cast<Eigen::Index>(N));
  cov.selfadjointView<Eigen::Lower>().rankUpdate(
      (X.rowwise() - mean).transpose(), 1.0 / static_cast<double>(S - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pca(cov);
  if (pca.info() != Eigen::Success)
    throw NumericError("torus analysis: covariance eigensolve failed");
  const Eigen::MatrixXd basis =
      pca.eigenvectors().rightCols(static_cast<Eigen::Index>(pdims));

  // strided subsample for the graph
  const std::size_t stride = (S + max_embed - 1) / max_embed;
  std::vector<std::size_t> rows;
  for (std::size_t s = 0; s < S; s += stride) rows.push_back(s);
  const std::size_t M = rows.size();
  if (M <= knn + 1)
    throw ConfigError("torus analysis: subsample smaller than graph degree");

  Eigen::MatrixXd Y(static_cast<Eigen::Index>(M),
                    static_cast<Eigen::Index>(pdims));
  for (std::size_t i = 0; i < M; ++i)
    Y.row(static_cast<Eigen::Index>(i)) =
        (X.row(static_cast<Eigen::Index>(rows[i])) - mean) * basis;

  // symmetrized kNN adjacency
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M),
                                            static_cast<Eigen::Index>(M));
  {
    std::vector<double> d2(M);
    std::vector<std::size_t> order(M);
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t j = 0; j < M; ++j)
        d2[j] = (Y.row(static_cast<Eigen::Index>(i)) -
                 Y.row(static_cast<Eigen::Index>(j)))
                    .squaredNorm();
      d2[i] = std::numeric_limits<double>::infinity();
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + static_cast<long>(knn),
                        order.end(), [&](std::size_t a, std::size_t b) {
                          return d2[a] < d2[b];
                        });
      for (std::size_t k = 0; k < knn; ++k) {
        W(static_cast<Eigen::Index>(i),
          static_cast<Eigen::Index>(order[k])) = 1.0;
        W(static_cast<Eigen::Index>(order[k]),
          static_cast<Eigen::Index>(i)) = 1.0;
      }
    }
  }

  // symmetric-normalized Laplacian eigenmaps
  Eigen::VectorXd deg = W.rowwise().sum();
  Eigen::VectorXd dinv = deg.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd L =
      Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(M),
                                static_cast<Eigen::Index>(M)) -
      dinv.asDiagonal() * W * dinv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
  if (eig.info() != Eigen::Success)
    throw NumericError("torus analysis: Laplacian eigensolve failed");

  res.embedding = Tensor<double>(Shape::mat(M, kEmbedDims));
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t d = 0; d < kEmbedDims; ++d)
      res.embedding.at(i, d) =
          eig.eigenvectors()(static_cast<Eigen::Index>(i),
                             static_cast<Eigen::Index>(d + 1));
  res.samples_embedded = M;
  return res;
}

}  // namespace gridssl
