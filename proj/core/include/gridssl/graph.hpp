#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "gridssl/error.hpp"
#include "gridssl/tensor.hpp"

namespace gridssl {

// Reverse-mode autodiff on a flat tape. Forward values are computed eagerly as
// nodes are created; backward() walks the tape in reverse creation order, so
// gradient accumulation order is fixed and runs are bit-reproducible.
//
// Supported ranks: 0 (scalar), 1 (vector), 2 (matrix). Binary elementwise ops
// broadcast like 2-D numpy arrays (a dim must match or be 1).
template <class Real>
class Graph {
 public:
  using Id = std::int32_t;

  enum class Op : std::uint8_t {
    Leaf, Const, MatMul, Add, Sub, Mul, Div, ScalarMul, AddScalar,
    Relu, Exp, Square, Sum, Mean, Variance, L2Norm,
    ConcatRows, SliceRow, SliceRows, Reshape, SelectSum,
  };

  // ---- inputs -------------------------------------------------------------

  // Differentiable input. Borrows `external`; caller keeps it alive.
  Id leaf(const Tensor<Real>& external) {
    Node n(Op::Leaf);
    n.ext = &external;
    n.rg = true;
    return push(std::move(n));
  }

  // Non-differentiable input, owned by the graph.
  Id constant(Tensor<Real> value) {
    Node n(Op::Const);
    n.store = std::move(value);
    return push(std::move(n));
  }

  // Non-differentiable input. Borrows `external`; caller keeps it alive.
  Id constant_view(const Tensor<Real>& external) {
    Node n(Op::Const);
    n.ext = &external;
    return push(std::move(n));
  }

  // ---- ops ----------------------------------------------------------------

  Id matmul(Id a, Id b, bool ta = false, bool tb = false) {
    const Tensor<Real>& A = val(a);
    const Tensor<Real>& B = val(b);
    if (A.shape.rank() == 1 && ta)
      throw ConfigError("matmul: cannot transpose a rank-1 left operand");
    if (B.shape.rank() == 1 && tb)
      throw ConfigError("matmul: cannot transpose a rank-1 right operand");
    if (A.shape.rank() < 1 || A.shape.rank() > 2 || B.shape.rank() < 1 ||
        B.shape.rank() > 2)
      throw ConfigError("matmul: operands must be rank 1 or 2");

    auto [ar, ac] = lhs_dims(A.shape);
    auto [br, bc] = rhs_dims(B.shape);
    std::size_t M = ta ? ac : ar, K = ta ? ar : ac;
    std::size_t K2 = tb ? bc : br, N = tb ? br : bc;
    if (K != K2)
      throw ConfigError("matmul: inner dims " + A.shape.str() + " x " +
                        B.shape.str() + " incompatible");

    Shape out;
    if (A.shape.rank() == 2 && B.shape.rank() == 2) out = Shape::mat(M, N);
    else if (A.shape.rank() == 2) out = Shape::vec(M);
    else if (B.shape.rank() == 2) out = Shape::vec(N);
    else out = Shape::scalar();

    Node n(Op::MatMul, a, b);
    n.ta = ta;
    n.tb = tb;
    n.store = Tensor<Real>(out);
    auto Am = cmap(A.data(), ar, ac);
    auto Bm = cmap(B.data(), br, bc);
    auto Cm = map(n.store.data(), M, N);
    if (!ta && !tb) Cm.noalias() = Am * Bm;
    else if (ta && !tb) Cm.noalias() = Am.transpose() * Bm;
    else if (!ta && tb) Cm.noalias() = Am * Bm.transpose();
    else Cm.noalias() = Am.transpose() * Bm.transpose();
    return finish(std::move(n));
  }

  Id add(Id a, Id b) { return binary(Op::Add, a, b); }
  Id sub(Id a, Id b) { return binary(Op::Sub, a, b); }
  Id mul(Id a, Id b) { return binary(Op::Mul, a, b); }

  Id div(Id a, Id b) {
    const Tensor<Real>& B = val(b);
    for (std::size_t i = 0; i < B.size(); ++i)
      if (B[i] == Real(0)) throw NumericError("division by zero in graph div");
    return binary(Op::Div, a, b);
  }

  Id scalar_mul(Id a, Real c) {
    Node n(Op::ScalarMul, a);
    n.scalar = c;
    n.store = Tensor<Real>(val(a).shape);
    const auto& x = val(a);
    for (std::size_t i = 0; i < x.size(); ++i) n.store[i] = x[i] * c;
    return finish(std::move(n));
  }

  Id add_scalar(Id a, Real c) {
    Node n(Op::AddScalar, a);
    n.scalar = c;
    n.store = Tensor<Real>(val(a).shape);
    const auto& x = val(a);
    for (std::size_t i = 0; i < x.size(); ++i) n.store[i] = x[i] + c;
    return finish(std::move(n));
  }

  Id relu(Id a) {
    Node n(Op::Relu, a);
    const auto& x = val(a);
    n.store = Tensor<Real>(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i)
      n.store[i] = x[i] > Real(0) ? x[i] : Real(0);
    return finish(std::move(n));
  }

  Id exp(Id a) {
    Node n(Op::Exp, a);
    const auto& x = val(a);
    n.store = Tensor<Real>(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) n.store[i] = std::exp(x[i]);
    return finish(std::move(n));
  }

  Id square(Id a) {
    Node n(Op::Square, a);
    const auto& x = val(a);
    n.store = Tensor<Real>(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) n.store[i] = x[i] * x[i];
    return finish(std::move(n));
  }

  // axis -1: all elements -> scalar; axis 0: column sums; axis 1: row sums.
  Id sum(Id a, int axis = -1) {
    const auto& x = val(a);
    Node n(Op::Sum, a);
    n.axis = static_cast<std::int8_t>(x.shape.rank() == 2 ? axis : -1);
    n.store = reduce_alloc(x.shape, n.axis);
    if (n.axis == -1) {
      Real s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
      n.store[0] = s;
    } else {
      std::size_t r = x.shape.rows(), c = x.shape.cols();
      if (n.axis == 0) {
        for (std::size_t j = 0; j < c; ++j) {
          Real s = 0;
          for (std::size_t i = 0; i < r; ++i) s += x[i * c + j];
          n.store[j] = s;
        }
      } else {
        for (std::size_t i = 0; i < r; ++i) {
          Real s = 0;
          for (std::size_t j = 0; j < c; ++j) s += x[i * c + j];
          n.store[i] = s;
        }
      }
    }
    return finish(std::move(n));
  }

  Id mean(Id a, int axis = -1) {
    const auto& x = val(a);
    Node n(Op::Mean, a);
    n.axis = static_cast<std::int8_t>(x.shape.rank() == 2 ? axis : -1);
    n.store = reduce_alloc(x.shape, n.axis);
    if (n.axis == -1) {
      Real s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
      n.store[0] = s / static_cast<Real>(x.size());
    } else {
      std::size_t r = x.shape.rows(), c = x.shape.cols();
      if (n.axis == 0) {
        for (std::size_t j = 0; j < c; ++j) {
          Real s = 0;
          for (std::size_t i = 0; i < r; ++i) s += x[i * c + j];
          n.store[j] = s / static_cast<Real>(r);
        }
      } else {
        for (std::size_t i = 0; i < r; ++i) {
          Real s = 0;
          for (std::size_t j = 0; j < c; ++j) s += x[i * c + j];
          n.store[i] = s / static_cast<Real>(c);
        }
      }
    }
    return finish(std::move(n));
  }

  // Population variance over all elements.
  Id variance(Id a) {
    const auto& x = val(a);
    if (x.size() == 0) throw ConfigError("variance of empty tensor");
    Node n(Op::Variance, a);
    n.store = Tensor<Real>(Shape::scalar());
    Real mu = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mu += x[i];
    mu /= static_cast<Real>(x.size());
    Real s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mu) * (x[i] - mu);
    n.store[0] = s / static_cast<Real>(x.size());
    n.scalar = mu;
    return finish(std::move(n));
  }

  // sqrt(sum(x^2) + eps^2) over all elements. eps > 0 keeps the gradient
  // finite at x = 0 (training); eps = 0 is the exact norm.
  Id l2norm(Id a, Real eps = Real(0)) {
    const auto& x = val(a);
    Node n(Op::L2Norm, a);
    n.scalar = eps;
    n.store = Tensor<Real>(Shape::scalar());
    Real s = eps * eps;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i];
    n.store[0] = std::sqrt(s);
    return finish(std::move(n));
  }

  // Stack rank-1 inputs of equal length as matrix rows, or rank-0 inputs as a
  // vector.
  Id concat_rows(const std::vector<Id>& parts) {
    if (parts.empty()) throw ConfigError("concat_rows: empty input list");
    const auto& first = val(parts[0]);
    Node n(Op::ConcatRows);
    bool scalars = first.shape.rank() == 0;
    std::size_t w = scalars ? 1 : first.shape.dim(0);
    n.store = Tensor<Real>(scalars ? Shape::vec(parts.size())
                                   : Shape::mat(parts.size(), w));
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto& p = val(parts[k]);
      if (p.size() != w || p.shape.rank() != first.shape.rank())
        throw ConfigError("concat_rows: mismatched part shapes");
      std::copy(p.data(), p.data() + w, n.store.data() + k * w);
      if (nodes_[parts[k]].rg) n.rg = true;
    }
    n.cat = std::make_shared<const std::vector<Id>>(parts);
    return push_noprop(std::move(n));
  }

  Id slice_row(Id a, std::size_t row) {
    const auto& x = val(a);
    if (x.shape.rank() != 2 || row >= x.shape.rows())
      throw ConfigError("slice_row: bad row");
    Node n(Op::SliceRow, a);
    n.row0 = static_cast<std::uint32_t>(row);
    n.nrows = 1;
    std::size_t c = x.shape.cols();
    n.store = Tensor<Real>(Shape::vec(c));
    std::copy(x.data() + row * c, x.data() + (row + 1) * c, n.store.data());
    return finish(std::move(n));
  }

  Id slice_rows(Id a, std::size_t row0, std::size_t count) {
    const auto& x = val(a);
    if (x.shape.rank() != 2 || row0 + count > x.shape.rows())
      throw ConfigError("slice_rows: bad range");
    Node n(Op::SliceRows, a);
    n.row0 = static_cast<std::uint32_t>(row0);
    n.nrows = static_cast<std::uint32_t>(count);
    std::size_t c = x.shape.cols();
    n.store = Tensor<Real>(Shape::mat(count, c));
    std::copy(x.data() + row0 * c, x.data() + (row0 + count) * c,
              n.store.data());
    return finish(std::move(n));
  }

  Id reshape(Id a, Shape s) {
    const auto& x = val(a);
    if (s.numel() != x.size())
      throw ConfigError("reshape: numel mismatch " + x.shape.str() + " -> " +
                        s.str());
    Node n(Op::Reshape, a);
    n.store = Tensor<Real>(s);
    std::copy(x.data(), x.data() + x.size(), n.store.data());
    return finish(std::move(n));
  }

  // Sum of elements at flat indices (duplicates accumulate).
  Id select_sum(Id a, std::shared_ptr<const std::vector<std::uint32_t>> idx) {
    const auto& x = val(a);
    Node n(Op::SelectSum, a);
    n.store = Tensor<Real>(Shape::scalar());
    Real s = 0;
    for (std::uint32_t i : *idx) {
      if (i >= x.size()) throw ConfigError("select_sum: index out of range");
      s += x[i];
    }
    n.store[0] = s;
    n.idx = std::move(idx);
    return finish(std::move(n));
  }

  Id select_sum(Id a, std::vector<std::uint32_t> idx) {
    return select_sum(
        a, std::make_shared<const std::vector<std::uint32_t>>(std::move(idx)));
  }

  // ---- access ---------------------------------------------------------------

  const Tensor<Real>& value(Id id) const {
    const Node& n = nodes_[id];
    return n.ext ? *n.ext : n.store;
  }
  bool requires_grad(Id id) const { return nodes_[id].rg; }

  // Null until backward() touches the node.
  const Tensor<Real>* grad_of(Id id) const {
    return nodes_[id].grad.empty() ? nullptr : &nodes_[id].grad;
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // ---- backward -------------------------------------------------------------

  void backward(Id root) {
    if (val(root).size() != 1)
      throw ConfigError("backward: root must be a scalar");
    for (auto& n : nodes_) n.grad = Tensor<Real>();
    if (!nodes_[root].rg) return;
    touch(root)[0] = Real(1);
    for (Id id = root; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.grad.empty() || !n.rg) continue;
      accumulate(n);
    }
  }

 private:
  struct Node {
    explicit Node(Op o, Id a_ = -1, Id b_ = -1) : op(o), a(a_), b(b_) {}
    Op op;
    Id a, b;
    bool ta = false, tb = false;
    std::int8_t axis = -1;
    Real scalar = 0;
    std::uint32_t row0 = 0, nrows = 0;
    std::shared_ptr<const std::vector<std::uint32_t>> idx;
    std::shared_ptr<const std::vector<Id>> cat;
    Tensor<Real> store;
    const Tensor<Real>* ext = nullptr;  // borrowed leaf/const value
    Tensor<Real> grad;
    bool rg = false;
  };

  using EMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
  static Eigen::Map<const EMat> cmap(const Real* p, std::size_t r,
                                     std::size_t c) {
    return Eigen::Map<const EMat>(p, static_cast<Eigen::Index>(r),
                                  static_cast<Eigen::Index>(c));
  }
  static Eigen::Map<EMat> map(Real* p, std::size_t r, std::size_t c) {
    return Eigen::Map<EMat>(p, static_cast<Eigen::Index>(r),
                            static_cast<Eigen::Index>(c));
  }

  // Storage dims when used as a matmul operand.
  static std::pair<std::size_t, std::size_t> lhs_dims(const Shape& s) {
    return s.rank() == 2 ? std::pair{s.rows(), s.cols()}
                         : std::pair{std::size_t{1}, s.dim(0)};
  }
  static std::pair<std::size_t, std::size_t> rhs_dims(const Shape& s) {
    return s.rank() == 2 ? std::pair{s.rows(), s.cols()}
                         : std::pair{s.dim(0), std::size_t{1}};
  }

  // Effective 2-D dims for broadcasting (rank-1 is a row vector).
  static std::pair<std::size_t, std::size_t> bdims(const Shape& s) {
    switch (s.rank()) {
      case 0: return {1, 1};
      case 1: return {1, s.dim(0)};
      case 2: return {s.rows(), s.cols()};
      default: throw ConfigError("elementwise ops support rank <= 2");
    }
  }

  Id push(Node&& n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id push_noprop(Node&& n) { return push(std::move(n)); }

  // Propagate requires-grad from inputs, then push.
  Id finish(Node&& n) {
    n.rg = (n.a >= 0 && nodes_[n.a].rg) || (n.b >= 0 && nodes_[n.b].rg);
    return push(std::move(n));
  }

  const Tensor<Real>& val(Id id) const { return value(id); }

  Tensor<Real>& touch(Id id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<Real>(val(id).shape);
    return n.grad;
  }

  Id binary(Op op, Id a, Id b) {
    const Tensor<Real>& A = val(a);
    const Tensor<Real>& B = val(b);
    auto [ra, ca] = bdims(A.shape);
    auto [rb, cb] = bdims(B.shape);
    if ((ra != rb && ra != 1 && rb != 1) || (ca != cb && ca != 1 && cb != 1))
      throw ConfigError("elementwise: shapes " + A.shape.str() + " and " +
                        B.shape.str() + " do not broadcast");
    std::size_t rr = std::max(ra, rb), cc = std::max(ca, cb);
    Shape out;
    std::size_t orank = std::max(A.shape.rank(), B.shape.rank());
    if (orank == 0) out = Shape::scalar();
    else if (orank == 1) out = Shape::vec(cc);
    else out = Shape::mat(rr, cc);

    Node n(op, a, b);
    n.store = Tensor<Real>(out);
    Real* o = n.store.data();
    const Real* pa = A.data();
    const Real* pb = B.data();
    if (A.shape == B.shape) {
      std::size_t m = A.size();
      switch (op) {
        case Op::Add: for (std::size_t i = 0; i < m; ++i) o[i] = pa[i] + pb[i]; break;
        case Op::Sub: for (std::size_t i = 0; i < m; ++i) o[i] = pa[i] - pb[i]; break;
        case Op::Mul: for (std::size_t i = 0; i < m; ++i) o[i] = pa[i] * pb[i]; break;
        default:      for (std::size_t i = 0; i < m; ++i) o[i] = pa[i] / pb[i]; break;
      }
    } else {
      for (std::size_t i = 0; i < rr; ++i) {
        const Real* rowa = pa + (ra == 1 ? 0 : i * ca);
        const Real* rowb = pb + (rb == 1 ? 0 : i * cb);
        for (std::size_t j = 0; j < cc; ++j) {
          Real x = rowa[ca == 1 ? 0 : j];
          Real y = rowb[cb == 1 ? 0 : j];
          switch (op) {
            case Op::Add: o[i * cc + j] = x + y; break;
            case Op::Sub: o[i * cc + j] = x - y; break;
            case Op::Mul: o[i * cc + j] = x * y; break;
            default:      o[i * cc + j] = x / y; break;
          }
        }
      }
    }
    return finish(std::move(n));
  }

  void accum_binary(Node& n) {
    const Tensor<Real>& A = val(n.a);
    const Tensor<Real>& B = val(n.b);
    auto [ra, ca] = bdims(A.shape);
    auto [rb, cb] = bdims(B.shape);
    auto [rr, cc] = bdims(n.store.shape);
    bool wa = nodes_[n.a].rg, wb = nodes_[n.b].rg;
    Real* ga = wa ? touch(n.a).data() : nullptr;
    Real* gb = wb ? touch(n.b).data() : nullptr;
    const Real* g = n.grad.data();
    const Real* pa = A.data();
    const Real* pb = B.data();

    if (A.shape == B.shape && A.shape == n.store.shape) {
      std::size_t m = A.size();
      switch (n.op) {
        case Op::Add:
          if (wa) for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
          if (wb) for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
          break;
        case Op::Sub:
          if (wa) for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
          if (wb) for (std::size_t i = 0; i < m; ++i) gb[i] -= g[i];
          break;
        case Op::Mul:
          if (wa) for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * pb[i];
          if (wb) for (std::size_t i = 0; i < m; ++i) gb[i] += g[i] * pa[i];
          break;
        default:
          if (wa) for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] / pb[i];
          if (wb)
            for (std::size_t i = 0; i < m; ++i)
              gb[i] -= g[i] * pa[i] / (pb[i] * pb[i]);
          break;
      }
      return;
    }

    for (std::size_t i = 0; i < rr; ++i) {
      std::size_t ia = (ra == 1 ? 0 : i);
      std::size_t ib = (rb == 1 ? 0 : i);
      for (std::size_t j = 0; j < cc; ++j) {
        std::size_t ja = (ca == 1 ? 0 : j);
        std::size_t jb = (cb == 1 ? 0 : j);
        Real gg = g[i * cc + j];
        Real x = pa[ia * ca + ja];
        Real y = pb[ib * cb + jb];
        switch (n.op) {
          case Op::Add:
            if (wa) ga[ia * ca + ja] += gg;
            if (wb) gb[ib * cb + jb] += gg;
            break;
          case Op::Sub:
            if (wa) ga[ia * ca + ja] += gg;
            if (wb) gb[ib * cb + jb] -= gg;
            break;
          case Op::Mul:
            if (wa) ga[ia * ca + ja] += gg * y;
            if (wb) gb[ib * cb + jb] += gg * x;
            break;
          default:
            if (wa) ga[ia * ca + ja] += gg / y;
            if (wb) gb[ib * cb + jb] -= gg * x / (y * y);
            break;
        }
      }
    }
  }

  void accum_matmul(Node& n) {
    const Tensor<Real>& A = val(n.a);
    const Tensor<Real>& B = val(n.b);
    auto [ar, ac] = lhs_dims(A.shape);
    auto [br, bc] = rhs_dims(B.shape);
    std::size_t M = n.ta ? ac : ar, K = n.ta ? ar : ac;
    std::size_t N = n.tb ? br : bc;
    auto G = cmap(n.grad.data(), M, N);
    auto Am = cmap(A.data(), ar, ac);
    auto Bm = cmap(B.data(), br, bc);
    if (nodes_[n.a].rg) {
      auto dA = map(touch(n.a).data(), ar, ac);
      if (!n.ta) {
        if (!n.tb) dA.noalias() += G * Bm.transpose();
        else dA.noalias() += G * Bm;
      } else {
        if (!n.tb) dA.noalias() += Bm * G.transpose();
        else dA.noalias() += Bm.transpose() * G.transpose();
      }
    }
    if (nodes_[n.b].rg) {
      auto dB = map(touch(n.b).data(), br, bc);
      if (!n.tb) {
        if (!n.ta) dB.noalias() += Am.transpose() * G;
        else dB.noalias() += Am * G;
      } else {
        if (!n.ta) dB.noalias() += G.transpose() * Am;
        else dB.noalias() += G.transpose() * Am.transpose();
      }
    }
    (void)K;
  }

  void accumulate(Node& n) {
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
        return;
      case Op::MatMul:
        accum_matmul(n);
        return;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
        accum_binary(n);
        return;
      case Op::ScalarMul: {
        if (!nodes_[n.a].rg) return;
        Real* ga = touch(n.a).data();
        const Real* g = n.grad.data();
        for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += g[i] * n.scalar;
        return;
      }
      case Op::AddScalar: {
        if (!nodes_[n.a].rg) return;
        Real* ga = touch(n.a).data();
        const Real* g = n.grad.data();
        for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += g[i];
        return;
      }
      case Op::Relu: {
        if (!nodes_[n.a].rg) return;
        const Tensor<Real>& x = val(n.a);
        Real* ga = touch(n.a).data();
        const Real* g = n.grad.data();
        for (std::size_t i = 0; i < x.size(); ++i)
          if (x[i] > Real(0)) ga[i] += g[i];
        return;
      }
      case Op::Exp: {
        if (!nodes_[n.a].rg) return;
        Real* ga = touch(n.a).data();
        const Real* g = n.grad.data();
        const Real* y = n.store.data();
        for (std::size_t i = 0; i < n.store.size(); ++i) ga[i] += g[i] * y[i];
        return;
      }
      case Op::Square: {
        if (!nodes_[n.a].rg) return;
        const Tensor<Real>& x = val(n.a);
        Real* ga = touch(n.a).data();
        const Real* g = n.grad.data();
        for (std::size_t i = 0; i < x.size(); ++i)
          ga[i] += Real(2) * x[i] * g[i];
        return;
      }
      case Op::Sum: {
        if (!nodes_[n.a].rg) return;
        const Tensor<Real>& x = val(n.a);
        Real* ga = touch(n.a).data();
        const Real* g = n.grad.data();
        if (n.axis == -1) {
          for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[0];
        } else {
          std::size_t r = x.shape.rows(), c = x.shape.cols();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              ga[i * c + j] += (n.axis == 0 ? g[j] : g[i]);
        }
        return;
      }
      case Op::Mean: {
        if (!nodes_[n.a].rg) return;
        const Tensor<Real>& x = val(n.a);
        Real* ga = touch(n.a).data();
        const Real* g = n.grad.data();
        if (n.axis == -1) {
          Real w = g[0] / static_cast<Real>(x.size());
          for (std::size_t i = 0; i < x.size(); ++i) ga[i] += w;
        } else {
          std::size_t r = x.shape.rows(), c = x.shape.cols();
          Real denom = static_cast<Real>(n.axis == 0 ? r : c);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              ga[i * c + j] += (n.axis == 0 ? g[j] : g[i]) / denom;
        }
        return;
      }
      case Op::Variance: {
        if (!nodes_[n.a].rg) return;
        const Tensor<Real>& x = val(n.a);
        Real* ga = touch(n.a).data();
        Real g = n.grad[0];
        Real mu = n.scalar;
        Real w = Real(2) * g / static_cast<Real>(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) ga[i] += w * (x[i] - mu);
        return;
      }
      case Op::L2Norm: {
        if (!nodes_[n.a].rg) return;
        const Tensor<Real>& x = val(n.a);
        Real v = n.store[0];
        if (v < Real(1e-300)) return;
        Real w = n.grad[0] / v;
        Real* ga = touch(n.a).data();
        for (std::size_t i = 0; i < x.size(); ++i) ga[i] += w * x[i];
        return;
      }
      case Op::ConcatRows: {
        const auto& parts = *n.cat;
        std::size_t w = n.store.shape.rank() == 2 ? n.store.shape.cols() : 1;
        const Real* g = n.grad.data();
        for (std::size_t k = 0; k < parts.size(); ++k) {
          if (!nodes_[parts[k]].rg) continue;
          Real* gp = touch(parts[k]).data();
          for (std::size_t j = 0; j < w; ++j) gp[j] += g[k * w + j];
        }
        return;
      }
      case Op::SliceRow:
      case Op::SliceRows: {
        if (!nodes_[n.a].rg) return;
        const Tensor<Real>& x = val(n.a);
        std::size_t c = x.shape.cols();
        Real* ga = touch(n.a).data() + n.row0 * c;
        const Real* g = n.grad.data();
        for (std::size_t i = 0; i < static_cast<std::size_t>(n.nrows) * c; ++i)
          ga[i] += g[i];
        return;
      }
      case Op::Reshape: {
        if (!nodes_[n.a].rg) return;
        Real* ga = touch(n.a).data();
        const Real* g = n.grad.data();
        for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += g[i];
        return;
      }
      case Op::SelectSum: {
        if (!nodes_[n.a].rg) return;
        Real* ga = touch(n.a).data();
        Real g = n.grad[0];
        for (std::uint32_t i : *n.idx) ga[i] += g;
        return;
      }
    }
  }

  static Tensor<Real> reduce_alloc(const Shape& s, int axis) {
    if (axis == -1) return Tensor<Real>(Shape::scalar());
    return Tensor<Real>(Shape::vec(axis == 0 ? s.cols() : s.rows()));
  }

  std::vector<Node> nodes_;
};

}  // namespace gridssl
