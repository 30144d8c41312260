#include "gridssl/model.hpp"

#include <Eigen/Core>
#include <cmath>

#include "gridssl/error.hpp"

namespace gridssl {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

// Batched MLP: rows of `vel` (R,2) -> rows of the returned (R, N*N) matrix.
EMat mlp_rows(const ModelParams<double>& p, const Eigen::Ref<const EMat>& vel) {
  CMap w1(p.w1.data(), static_cast<Eigen::Index>(p.hidden), 2);
  CMap w2(p.w2.data(), static_cast<Eigen::Index>(p.hidden),
          static_cast<Eigen::Index>(p.hidden));
  CMap w3(p.w3.data(), static_cast<Eigen::Index>(p.n_units * p.n_units),
          static_cast<Eigen::Index>(p.hidden));
  Eigen::Map<const Eigen::RowVectorXd> b1(p.b1.data(),
                                          static_cast<Eigen::Index>(p.hidden));
  Eigen::Map<const Eigen::RowVectorXd> b2(p.b2.data(),
                                          static_cast<Eigen::Index>(p.hidden));
  Eigen::Map<const Eigen::RowVectorXd> b3(
      p.b3.data(), static_cast<Eigen::Index>(p.n_units * p.n_units));
  EMat a1 = ((vel * w1.transpose()).rowwise() + b1).cwiseMax(0.0);
  EMat a2 = ((a1 * w2.transpose()).rowwise() + b2).cwiseMax(0.0);
  EMat a3 = (a2 * w3.transpose()).rowwise() + b3;
  return a3;
}

// NormReLU in place on a state vector; returns false when all nonpositive.
bool norm_relu_inplace(double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] < 0.0) x[i] = 0.0;
    s += x[i] * x[i];
  }
  if (s == 0.0) return false;
  double inv = 1.0 / std::sqrt(s);
  for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
  return true;
}

}  // namespace

Tensor<double> interaction_matrix(const ModelParams<double>& p, double vx,
                                  double vy) {
  EMat vel(1, 2);
  vel(0, 0) = vx;
  vel(0, 1) = vy;
  EMat row = mlp_rows(p, vel);
  Tensor<double> W(Shape::mat(p.n_units, p.n_units));
  std::copy(row.data(), row.data() + W.size(), W.data());
  return W;
}

Tensor<double> norm_relu(const Tensor<double>& x) {
  Tensor<double> y = x;
  if (!norm_relu_inplace(y.data(), y.size()))
    throw NumericError(
        "norm-relu: every component nonpositive, state has no direction");
  return y;
}

StateSequence unroll(const ModelParams<double>& p,
                     const Tensor<double>& velocities) {
  if (velocities.shape.rank() != 2 || velocities.shape.cols() != 2)
    throw ConfigError("unroll: velocities must be (T,2)");
  std::size_t T = velocities.shape.rows(), N = p.n_units;
  StateSequence seq;
  seq.states = Tensor<double>(Shape::mat(T, N));
  if (T == 0) return seq;

  CMap vel(velocities.data(), static_cast<Eigen::Index>(T), 2);
  EMat mats = mlp_rows(p, vel);  // (T, N*N)
  Eigen::VectorXd gv(static_cast<Eigen::Index>(N));
  std::copy(p.g0.data(), p.g0.data() + N, gv.data());
  Eigen::VectorXd h(static_cast<Eigen::Index>(N));
  for (std::size_t t = 0; t < T; ++t) {
    CMap W(mats.row(static_cast<Eigen::Index>(t)).data(),
           static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    h.noalias() = W * gv;
    if (!norm_relu_inplace(h.data(), N))
      throw DegenerateStateError(
          "unroll: degenerate state (all pre-activations nonpositive) at step " +
              std::to_string(t),
          t);
    gv = h;
    std::copy(gv.data(), gv.data() + N, &seq.states.at(t, 0));
  }
  return seq;
}

void unroll_streaming(const ModelParams<double>& p,
                      const Tensor<double>& velocities, std::size_t chunk,
                      const std::function<void(const Tensor<double>&,
                                               std::size_t)>& sink) {
  if (velocities.shape.rank() != 2 || velocities.shape.cols() != 2)
    throw ConfigError("unroll: velocities must be (T,2)");
  if (chunk == 0) throw ConfigError("unroll: chunk must be positive");
  std::size_t T = velocities.shape.rows(), N = p.n_units;

  Eigen::VectorXd gv(static_cast<Eigen::Index>(N));
  std::copy(p.g0.data(), p.g0.data() + N, gv.data());
  Eigen::VectorXd h(static_cast<Eigen::Index>(N));

  for (std::size_t row0 = 0; row0 < T; row0 += chunk) {
    std::size_t rows = std::min(chunk, T - row0);
    CMap vel(velocities.data() + row0 * 2, static_cast<Eigen::Index>(rows), 2);
    EMat mats = mlp_rows(p, vel);
    Tensor<double> out(Shape::mat(rows, N));
    for (std::size_t t = 0; t < rows; ++t) {
      CMap W(mats.row(static_cast<Eigen::Index>(t)).data(),
             static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
      h.noalias() = W * gv;
      if (!norm_relu_inplace(h.data(), N))
        throw DegenerateStateError(
            "unroll: degenerate state (all pre-activations nonpositive) at "
            "step " +
                std::to_string(row0 + t),
            row0 + t);
      gv = h;
      std::copy(gv.data(), gv.data() + N, &out.at(t, 0));
    }
    sink(out, row0);
  }
}

double commutation_residual(const ModelParams<double>& p, const double v1[2],
                            const double v2[2], const Tensor<double>& g) {
  auto stepv = [&p](const Tensor<double>& s, const double v[2]) {
    auto W = interaction_matrix(p, v[0], v[1]);
    std::size_t N = p.n_units;
    Tensor<double> h(Shape::vec(N));
    CMap Wm(W.data(), static_cast<Eigen::Index>(N),
            static_cast<Eigen::Index>(N));
    Eigen::Map<const Eigen::VectorXd> sv(s.data(),
                                         static_cast<Eigen::Index>(N));
    Eigen::Map<Eigen::VectorXd> hv(h.data(), static_cast<Eigen::Index>(N));
    hv.noalias() = Wm * sv;
    return norm_relu(h);
  };
  auto a = stepv(stepv(g, v1), v2);
  auto b = stepv(stepv(g, v2), v1);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace gridssl
