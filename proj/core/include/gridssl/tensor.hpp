#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "gridssl/error.hpp"

namespace gridssl {

// Dense shape, rank 0..3. Rank 0 is a scalar with numel 1.
class Shape {
 public:
  Shape() = default;

  static Shape scalar() { return Shape(); }
  static Shape vec(std::size_t n) { return Shape(1, n, 1, 1); }
  static Shape mat(std::size_t r, std::size_t c) { return Shape(2, r, c, 1); }
  static Shape cube(std::size_t a, std::size_t b, std::size_t c) {
    return Shape(3, a, b, c);
  }

  std::size_t rank() const { return rank_; }
  std::size_t dim(std::size_t i) const { return d_[i]; }
  std::size_t rows() const { return d_[0]; }
  std::size_t cols() const { return rank_ >= 2 ? d_[1] : 1; }
  std::size_t numel() const { return d_[0] * d_[1] * d_[2]; }

  bool operator==(const Shape& o) const {
    return rank_ == o.rank_ && d_ == o.d_;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < rank_; ++i) {
      if (i) s += ",";
      s += std::to_string(d_[i]);
    }
    return s + ")";
  }

 private:
  Shape(std::size_t rank, std::size_t a, std::size_t b, std::size_t c)
      : rank_(rank), d_{a, b, c} {}
  std::size_t rank_ = 0;
  std::array<std::size_t, 3> d_{1, 1, 1};
};

template <class Real>
struct Tensor {
  Shape shape;
  std::vector<Real> v;

  Tensor() = default;
  explicit Tensor(Shape s, Real fill = Real(0)) : shape(s), v(s.numel(), fill) {}

  static Tensor from(Shape s, std::vector<Real> vals) {
    if (vals.size() != s.numel())
      throw ConfigError("tensor literal size mismatch for shape " + s.str());
    Tensor t;
    t.shape = s;
    t.v = std::move(vals);
    return t;
  }
  static Tensor scalar(Real x) { return from(Shape::scalar(), {x}); }

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }

  Real* data() { return v.data(); }
  const Real* data() const { return v.data(); }

  Real& operator[](std::size_t i) { return v[i]; }
  Real operator[](std::size_t i) const { return v[i]; }

  Real& at(std::size_t i, std::size_t j) { return v[i * shape.dim(1) + j]; }
  Real at(std::size_t i, std::size_t j) const { return v[i * shape.dim(1) + j]; }
  Real& at(std::size_t i, std::size_t j, std::size_t k) {
    return v[(i * shape.dim(1) + j) * shape.dim(2) + k];
  }
  Real at(std::size_t i, std::size_t j, std::size_t k) const {
    return v[(i * shape.dim(1) + j) * shape.dim(2) + k];
  }

  void fill(Real x) { std::fill(v.begin(), v.end(), x); }

  template <class Other>
  static Tensor cast(const Tensor<Other>& o) {
    Tensor t(o.shape);
    for (std::size_t i = 0; i < o.size(); ++i) t.v[i] = static_cast<Real>(o.v[i]);
    return t;
  }
};

}  // namespace gridssl
