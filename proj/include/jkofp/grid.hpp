#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "jkofp/errors.hpp"

namespace jkofp {

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using VecX = Vec<double>;
using Index = Eigen::Index;

/// Uniform cell-centered mesh on [a, b] with n cells.
///
/// Node i sits at the cell center a + (i + 1/2) h; edge i at a + i h, so the
/// edges run from 0 to n and bracket the nodes.
template <class Scalar>
class BasicGrid {
 public:
  static constexpr Index kMinCells = 8;

  BasicGrid(Scalar a, Scalar b, Index n) : a_(a), b_(b), n_(n) {
    if (!(b > a)) throw InvalidArgument("grid: need b > a");
    if (n < kMinCells) throw InvalidArgument("grid: need at least 8 cells, got " + std::to_string(n));
    h_ = (b - a) / static_cast<Scalar>(n);
  }

  Scalar a() const { return a_; }
  Scalar b() const { return b_; }
  Scalar h() const { return h_; }
  Scalar length() const { return b_ - a_; }
  Index n() const { return n_; }

  Scalar node(Index i) const { return a_ + (static_cast<Scalar>(i) + Scalar(0.5)) * h_; }
  Scalar edge(Index i) const { return i == n_ ? b_ : a_ + static_cast<Scalar>(i) * h_; }

  Vec<Scalar> nodes() const {
    return Vec<Scalar>::LinSpaced(n_, node(0), node(n_ - 1));
  }
  Vec<Scalar> edges() const {
    Vec<Scalar> e(n_ + 1);
    for (Index i = 0; i <= n_; ++i) e[i] = edge(i);
    return e;
  }

  friend bool operator==(const BasicGrid& l, const BasicGrid& r) {
    return l.a_ == r.a_ && l.b_ == r.b_ && l.n_ == r.n_;
  }

 private:
  Scalar a_;
  Scalar b_;
  Index n_;
  Scalar h_;
};

/// Real samples at the cell centers of a grid.
template <class Scalar>
class BasicGridFunction {
 public:
  using GridType = BasicGrid<Scalar>;

  explicit BasicGridFunction(const GridType& grid) : grid_(grid), values_(Vec<Scalar>::Zero(grid.n())) {}

  BasicGridFunction(const GridType& grid, Vec<Scalar> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.n()) throw InvalidArgument("grid function: size does not match grid");
    if (!values_.allFinite()) throw InvalidArgument("grid function: non-finite sample");
  }

  /// Samples `f` at the cell centers.
  template <class F>
  static BasicGridFunction sample(const GridType& grid, F&& f) {
    Vec<Scalar> v(grid.n());
    for (Index i = 0; i < grid.n(); ++i) v[i] = f(grid.node(i));
    return BasicGridFunction(grid, std::move(v));
  }

  static BasicGridFunction constant(const GridType& grid, Scalar c) {
    return BasicGridFunction(grid, Vec<Scalar>::Constant(grid.n(), c));
  }

  const GridType& grid() const { return grid_; }
  const Vec<Scalar>& values() const { return values_; }
  Index size() const { return values_.size(); }
  Scalar operator[](Index i) const { return values_[i]; }

  /// Same grid, new samples; the expression is evaluated eagerly.
  template <class Derived>
  BasicGridFunction with_values(const Eigen::MatrixBase<Derived>& v) const {
    return BasicGridFunction(grid_, Vec<Scalar>(v));
  }

 private:
  GridType grid_;
  Vec<Scalar> values_;
};

using Grid1D = BasicGrid<double>;
using GridFunction = BasicGridFunction<double>;

/// Midpoint quadrature h * sum f_i.
template <class Scalar>
Scalar integrate(const BasicGridFunction<Scalar>& f) {
  return f.grid().h() * f.values().sum();
}

/// Midpoint quadrature of raw samples living on `grid`.
template <class Scalar, class Derived>
Scalar integrate(const BasicGrid<Scalar>& grid, const Eigen::MatrixBase<Derived>& v) {
  return grid.h() * v.sum();
}

/// First derivative: central differences inside, second-order one-sided
/// stencils on the two boundary cells.
template <class Scalar>
BasicGridFunction<Scalar> deriv1(const BasicGridFunction<Scalar>& f) {
  const Index n = f.size();
  if (n < 3) throw InvalidArgument("deriv1: need n >= 3");
  const Scalar h = f.grid().h();
  const auto& v = f.values();
  Vec<Scalar> d(n);
  d.segment(1, n - 2) = (v.segment(2, n - 2) - v.segment(0, n - 2)) / (2 * h);
  d[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h);
  d[n - 1] = (3 * v[n - 1] - 4 * v[n - 2] + v[n - 3]) / (2 * h);
  return f.with_values(d);
}

/// Second derivative: three-point stencil inside, four-point one-sided
/// stencils (second order) on the boundary cells.
template <class Scalar>
BasicGridFunction<Scalar> deriv2(const BasicGridFunction<Scalar>& f) {
  const Index n = f.size();
  if (n < 5) throw InvalidArgument("deriv2: need n >= 5");
  const Scalar h2 = f.grid().h() * f.grid().h();
  const auto& v = f.values();
  Vec<Scalar> d(n);
  d.segment(1, n - 2) = (v.segment(2, n - 2) - 2 * v.segment(1, n - 2) + v.segment(0, n - 2)) / h2;
  d[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h2;
  d[n - 1] = (2 * v[n - 1] - 5 * v[n - 2] + 4 * v[n - 3] - v[n - 4]) / h2;
  return f.with_values(d);
}

/// Discrete H^order norm: sqrt of sum_{j <= order} integral of (D^j f)^2.
template <class Scalar>
Scalar sobolev_norm(const BasicGridFunction<Scalar>& f, int order) {
  if (order < 0 || order > 2) throw InvalidArgument("sobolev_norm: order must be 0, 1 or 2");
  const Scalar h = f.grid().h();
  Scalar acc = h * f.values().squaredNorm();
  if (order >= 1) acc += h * deriv1(f).values().squaredNorm();
  if (order >= 2) acc += h * deriv2(f).values().squaredNorm();
  return std::sqrt(acc);
}

}  // namespace jkofp
