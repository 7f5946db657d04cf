#pragma once

#include <vector>

#include "jkofp/functionals.hpp"

namespace jkofp {

/// Snapshots of the no-flux Fokker-Planck solution d_t rho = rho'' + (rho V')'.
struct FPSolution {
  Grid1D grid;
  Potential V;
  double dt = 0;
  std::vector<double> times;
  std::vector<Density> densities;

  /// Linear interpolation in time between neighbouring snapshots.
  VecX at(double t) const;
};

/// One implicit Euler step of the finite-volume scheme.
///
/// Interface fluxes use the Scharfetter-Gummel weights B(z) = z / (e^z - 1):
///   Phi_{i+1/2} = (B(-dV) rho_{i+1} - B(dV) rho_i) / h,  dV = V_{i+1} - V_i,
/// which agrees with (rho_{i+1} - rho_i)/h + (rho_i + rho_{i+1})/2 * dV/h to
/// first order in dV and vanishes identically on the discrete Gibbs state.
/// Boundary fluxes are zero, so mass is conserved up to roundoff.
Density fp_step(const Density& rho, const Potential& V, double dt);

/// Chains fp_step up to T and keeps every `snapshot_every`-th state (and the
/// final one).
FPSolution fp_solve(const Density& rho0, const Potential& V, double T, double dt, int snapshot_every = 1);

/// Both sides of an integrated dissipation identity change(T) = -dissipation.
struct DissipationBalance {
  double change = 0;       // functional at T minus functional at 0
  double dissipation = 0;  // time integral of the dissipation rate
  double residual = 0;     // |change + dissipation|
};

/// d/dt int rho^2 = -2 int |rho'|^2 - 2 int rho rho' V', integrated in time by
/// the trapezoid rule over snapshots. The spatial integral pairs the interface
/// difference of rho with the scheme flux, so it vanishes on the Gibbs state.
DissipationBalance dissipation_L2(const FPSolution& sol);

/// d/dt F_2 = -int |(log rho + V)''|^2 rho - int ((log rho + V)')^2 V'' rho.
/// The one-dimensional boundary term vanishes under the no-flux condition.
DissipationBalance dissipation_F2(const FPSolution& sol, const Potential& V);

/// Integrand of the F_2 dissipation at a single density.
double f2_dissipation_rate(const Density& rho, const Potential& V);

}  // namespace jkofp
