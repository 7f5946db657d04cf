#pragma once

#include "jkofp/grid.hpp"

namespace jkofp {

inline constexpr double kDefaultFloor = 1e-10;

/// Nonnegative grid function with unit mass and a strictly positive floor.
class Density {
 public:
  static constexpr double kMassTol = 1e-10;

  /// Validates `f` as-is: every value >= floor and integral 1 within kMassTol.
  Density(GridFunction f, double floor = kDefaultFloor);

  /// Builds a density from an arbitrary nonnegative profile: negative parts are
  /// dropped, the profile is normalized, and floor mass is blended in so that
  /// the result respects both invariants exactly.
  static Density from_profile(const GridFunction& profile, double floor = kDefaultFloor);

  /// Rescales positive samples to unit mass (no floor blending).
  static Density normalized(const GridFunction& f, double floor = kDefaultFloor);

  template <class F>
  static Density from_function(const Grid1D& grid, F&& f, double floor = kDefaultFloor) {
    return from_profile(GridFunction::sample(grid, std::forward<F>(f)), floor);
  }

  static Density uniform(const Grid1D& grid, double floor = kDefaultFloor);

  const GridFunction& f() const { return f_; }
  const VecX& values() const { return f_.values(); }
  const Grid1D& grid() const { return f_.grid(); }
  double floor() const { return floor_; }
  double operator[](Index i) const { return f_[i]; }

 private:
  GridFunction f_;
  double floor_;
};

/// Confining potential V sampled on the grid, with a Lipschitz bound and the
/// lower bound lambda on V''.
class Potential {
 public:
  Potential(GridFunction V, double lip, double lambda);

  /// Derives lip and lambda from discrete derivatives of the samples.
  static Potential from_samples(GridFunction V);

  const GridFunction& V() const { return V_; }
  const VecX& values() const { return V_.values(); }
  const Grid1D& grid() const { return V_.grid(); }
  double lip() const { return lip_; }
  double lambda() const { return lambda_; }

 private:
  GridFunction V_;
  double lip_;
  double lambda_;
};

Potential zero_potential(const Grid1D& grid);

/// V(x) = strength (x - center)^2.
Potential quadratic_potential(const Grid1D& grid, double center, double strength);

/// V(x) = strength ((x - center)^2 - width^2)^2; lambda = -4 strength width^2.
Potential double_well_potential(const Grid1D& grid, double center, double width, double strength);

/// J(rho) = integral of rho log rho + rho V.
double entropy_J(const Density& rho, const Potential& V);

/// F_p(rho) = (1/p) integral of |(log rho + V)'|^p rho, p >= 2.
///
/// The gradient of log rho is differenced directly, which is the same as
/// rho'/rho in the continuum and cancels exactly against V' at the Gibbs state.
double fisher_Fp(const Density& rho, const Potential& V, double p);

/// e^{-V} / Z, the unique minimizer of J.
Density gibbs_density(const Potential& V, double floor = kDefaultFloor);

/// log rho + V as a grid function.
GridFunction log_gibbs_ratio(const Density& rho, const Potential& V);

}  // namespace jkofp
