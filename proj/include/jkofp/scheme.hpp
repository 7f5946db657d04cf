#pragma once

#include <vector>

#include "jkofp/functionals.hpp"
#include "jkofp/transport.hpp"
#include "jkofp/tridiagonal.hpp"

namespace jkofp {

struct JKOConfig {
  double tau = 1e-3;
  double newton_tol = 1e-10;
  int max_newton = 60;
  double damping = 0.5;  // backtracking factor in (0, 1)

  /// Throws InvalidArgument / SmallnessViolated (1 + 2 lambda tau <= 0).
  void validate(const Potential& V) const;
};

/// Discrete JKO objective J(rho) + W2^2(rho, rho_prev) / (2 tau) over
/// cellwise-constant densities, written in the cumulative masses F_1..F_{n-1}
/// at the interior cell edges.
///
/// Those masses are the knots of the (exact, piecewise-linear) quantile
/// function of rho, so W2^2 is integrated exactly against the quantile curve
/// of rho_prev. The entropy is separable in the increments D_i = F_{i+1} - F_i
/// and acts as a barrier for D_i > 0; the Hessian is tridiagonal.
class StepObjective {
 public:
  StepObjective(const Density& prev, const Potential& V, double tau);

  Index dim() const { return grid_.n() - 1; }

  /// Interior cumulative masses of a density on the same grid.
  VecX coordinates(const Density& rho) const;
  /// True when every increment D_i is positive.
  bool admissible(const VecX& F) const;
  Density density(const VecX& F, double floor) const;

  double value(const VecX& F) const;
  VecX gradient(const VecX& F) const;
  Tridiagonal hessian(const VecX& F) const;

  const Density& prev() const { return prev_; }

 private:
  VecX increments(const VecX& F) const;
  VecX full_knots(const VecX& F) const;
  // Per cell: integrals of r theta and r (1 - theta) where r = X - X_prev and
  // theta is the local coordinate along the cell's quantile piece.
  void residual_moments(const VecX& F, VecX& r_theta, VecX& r_comp) const;

  Grid1D grid_;
  Density prev_;
  QuantileCurve prev_curve_;
  VecX V_;
  double tau_;
};

struct JKOStepResult {
  Density rho_next;
  TransportPlan plan;  // rho_next -> rho_prev
  double tau = 0;
  double J_prev = 0;
  double J_next = 0;
  double w2 = 0;
  double optimality_residual = 0;  // std over cells of log rho_next + V + phi / tau
  double optimality_offset = 0;    // mean over cells of the same quantity
  double gradient_norm = 0;
  int newton_iters = 0;
};

JKOStepResult jko_step(const Density& rho_prev, const Potential& V, const JKOConfig& cfg);

/// Piecewise-constant minimizing-movement curve: rho(t) = rho_{k+1} for
/// t in (k tau, (k+1) tau], rho(0) = rho_0.
struct JKOTrajectory {
  double tau = 0;
  std::vector<Density> densities;  // rho_0 .. rho_N
  std::vector<JKOStepResult> steps;

  Index N() const { return static_cast<Index>(steps.size()); }
  double horizon() const { return tau * static_cast<double>(N()); }
  /// Index k with rho(t) = densities[k].
  Index index_at(double t) const;
  const Density& at(double t) const { return densities[static_cast<size_t>(index_at(t))]; }
};

JKOTrajectory run_trajectory(const Density& rho0, const Potential& V, double T, const JKOConfig& cfg);

/// The partially affine regularization rho^{tau,eps} of a trajectory: equal to
/// rho_{k+1} on (k tau, k tau + (1 - eps) tau], linear from rho_{k+1} to
/// rho_{k+2} on the remaining eps tau of the interval (k <= N-2), and rho_N on
/// the last interval.
class InterpolatedCurve {
 public:
  InterpolatedCurve(const JKOTrajectory& base, double eps);

  VecX eval(double t) const;
  double eps() const { return eps_; }

  /// ||rho^tau - rho^{tau,eps}||_{L2(0,T; L2)} by three-point Gauss quadrature
  /// on every constant and blend interval.
  double l2l2_distance() const;
  /// Closed form sqrt(eps/3 sum_k tau ||rho_{k+2} - rho_{k+1}||^2).
  double l2l2_distance_closed_form() const;

 private:
  double tau_;
  std::vector<Density> rho_;
  double eps_;
};

InterpolatedCurve interpolate_eps(const JKOTrajectory& traj, double eps);

}  // namespace jkofp
