#pragma once

#include "jkofp/grid.hpp"

namespace jkofp {

/// Tridiagonal matrix stored by diagonals. lower[i] couples rows i+1 and i,
/// upper[i] couples rows i and i+1; both have size n-1.
template <class Scalar>
struct BasicTridiagonal {
  Vec<Scalar> lower;
  Vec<Scalar> diag;
  Vec<Scalar> upper;

  explicit BasicTridiagonal(Index n)
      : lower(Vec<Scalar>::Zero(n > 0 ? n - 1 : 0)),
        diag(Vec<Scalar>::Zero(n)),
        upper(Vec<Scalar>::Zero(n > 0 ? n - 1 : 0)) {}

  Index size() const { return diag.size(); }

  Vec<Scalar> operator*(const Vec<Scalar>& x) const {
    const Index n = size();
    Vec<Scalar> y = diag.cwiseProduct(x);
    if (n > 1) {
      y.head(n - 1) += upper.cwiseProduct(x.tail(n - 1));
      y.tail(n - 1) += lower.cwiseProduct(x.head(n - 1));
    }
    return y;
  }
};

using Tridiagonal = BasicTridiagonal<double>;

/// Thomas algorithm without pivoting; valid for the diagonally dominant and
/// symmetric positive definite systems assembled in this library.
template <class Scalar>
Vec<Scalar> solve(const BasicTridiagonal<Scalar>& A, const Vec<Scalar>& rhs) {
  const Index n = A.size();
  if (rhs.size() != n) throw InvalidArgument("tridiagonal solve: size mismatch");
  if (n == 0) return rhs;
  Vec<Scalar> c(n), d(n);
  Scalar denom = A.diag[0];
  if (denom == Scalar(0)) throw Error("tridiagonal solve: zero pivot");
  c[0] = n > 1 ? A.upper[0] / denom : Scalar(0);
  d[0] = rhs[0] / denom;
  for (Index i = 1; i < n; ++i) {
    denom = A.diag[i] - A.lower[i - 1] * c[i - 1];
    if (denom == Scalar(0)) throw Error("tridiagonal solve: zero pivot");
    c[i] = i + 1 < n ? A.upper[i] / denom : Scalar(0);
    d[i] = (rhs[i] - A.lower[i - 1] * d[i - 1]) / denom;
  }
  for (Index i = n - 2; i >= 0; --i) d[i] -= c[i] * d[i + 1];
  return d;
}

}  // namespace jkofp
