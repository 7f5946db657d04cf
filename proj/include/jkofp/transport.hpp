#pragma once

#include <vector>

#include "jkofp/functionals.hpp"

namespace jkofp {

/// Exact quantile function of a cellwise-constant density.
///
/// The CDF of such a density is piecewise linear with knots at the cell
/// edges, so its inverse is piecewise linear with knots (F_k, e_k), where F_k
/// is the mass to the left of edge e_k. Evaluation is exact, not sampled.
class QuantileCurve {
 public:
  explicit QuantileCurve(const Density& rho);

  /// Builds the curve from cumulative edge masses F_0 = 0 < ... < F_n = 1.
  QuantileCurve(const Grid1D& grid, VecX cumulative);

  double operator()(double s) const;
  /// Slope dX/ds on the piece containing s (right-continuous).
  double slope(double s) const;
  /// Index k with knots_[k] <= s < knots_[k+1], clamped to [0, n-1].
  Index piece(double s) const;

  const VecX& knots() const { return knots_; }
  const VecX& values() const { return values_; }
  const Grid1D& grid() const { return grid_; }

 private:
  Grid1D grid_;
  VecX knots_;   // cumulative mass at edges, length n+1
  VecX values_;  // edge positions, length n+1
};

/// Quantile values X(s_j) at the nodes s_j = (j + 1/2) / m.
struct QuantileFn {
  Index m = 0;
  VecX s;
  VecX X;
};

/// Kantorovich data for the transport from `source` to `target`.
///
/// phi and psi use the cost |x - y|^2 / 2, so phi' = id - T and psi' = id - S.
/// Both are stored as cell averages and normalized to zero integral.
struct TransportPlan {
  Density source;
  Density target;
  GridFunction T;    // forward map on source cell centers
  GridFunction S;    // inverse map on target cell centers
  GridFunction phi;
  GridFunction psi;
  double w2 = 0;
  // Map values at the domain endpoints (a, b) taken from the exact quantiles.
  double T_left = 0, T_right = 0, S_left = 0, S_right = 0;
};

/// Mass to the right edge of each cell: F_i = h * sum_{j <= i} rho_j.
GridFunction cdf(const Density& rho);

QuantileFn quantile(const Density& rho, Index m);

/// Squared W2 distance between two quantile curves on the same interval,
/// integrated exactly over the merged knot set.
double w2_squared(const QuantileCurve& x, const QuantileCurve& y);

double w2_distance(const Density& rho, const Density& g);

TransportPlan optimal_plan(const Density& rho, const Density& g);

/// max_i |x_i - T(x_i)|.
double displacement_sup(const TransportPlan& plan);

/// max over interior cells of |phi(x) + psi(T x) - |x - T x|^2 / 2 - c| where
/// c is the mean offset; psi is linearly interpolated at T x.
double duality_residual(const TransportPlan& plan);

}  // namespace jkofp
