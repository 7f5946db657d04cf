#include "jkofp/fokker_planck.hpp"

#include <algorithm>
#include <cmath>

#include "jkofp/tridiagonal.hpp"

namespace jkofp {

namespace {

double bernoulli(double z) {
  if (std::abs(z) < 1e-8) return 1 - 0.5 * z;
  return z / std::expm1(z);
}

template <class Rate>
double trapezoid(const FPSolution& sol, Rate&& rate) {
  double acc = 0;
  double prev = rate(sol.densities.front());
  for (size_t j = 1; j < sol.densities.size(); ++j) {
    const double cur = rate(sol.densities[j]);
    acc += 0.5 * (sol.times[j] - sol.times[j - 1]) * (prev + cur);
    prev = cur;
  }
  return acc;
}

}  // namespace

VecX FPSolution::at(double t) const {
  if (t <= times.front()) return densities.front().values();
  if (t >= times.back()) return densities.back().values();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const size_t j = static_cast<size_t>(it - times.begin());
  const double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
  return (1 - w) * densities[j - 1].values() + w * densities[j].values();
}

Density fp_step(const Density& rho, const Potential& V, double dt) {
  if (!(dt > 0)) throw InvalidArgument("fp_step: dt must be positive");
  const Grid1D& grid = rho.grid();
  if (!(V.grid() == grid)) throw InvalidArgument("fp_step: density and potential on different grids");
  const Index n = grid.n();
  const double c = dt / (grid.h() * grid.h());
  const VecX& v = V.values();

  Tridiagonal A(n);
  A.diag.setOnes();
  for (Index i = 0; i + 1 < n; ++i) {
    const double dV = v[i + 1] - v[i];
    const double fwd = c * bernoulli(dV);    // weight on rho_i in Phi_{i+1/2}
    const double bwd = c * bernoulli(-dV);   // weight on rho_{i+1}
    A.diag[i] += fwd;
    A.upper[i] = -bwd;
    A.diag[i + 1] += bwd;
    A.lower[i] = -fwd;
  }
  return Density(rho.f().with_values(solve(A, rho.values())), rho.floor());
}

FPSolution fp_solve(const Density& rho0, const Potential& V, double T, double dt, int snapshot_every) {
  if (!(dt > 0) || !(T > 0)) throw InvalidArgument("fp_solve: T and dt must be positive");
  if (snapshot_every < 1) throw InvalidArgument("fp_solve: snapshot_every must be >= 1");
  const double steps = std::round(T / dt);
  if (std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T)) {
    throw InvalidArgument("fp_solve: T must be an integer multiple of dt");
  }
  const auto N = static_cast<long>(steps);
  FPSolution sol{rho0.grid(), V, dt, {0.0}, {rho0}};
  Density cur = rho0;
  for (long k = 1; k <= N; ++k) {
    cur = fp_step(cur, V, dt);
    if (k % snapshot_every == 0 || k == N) {
      sol.times.push_back(static_cast<double>(k) * dt);
      sol.densities.push_back(cur);
    }
  }
  return sol;
}

DissipationBalance dissipation_L2(const FPSolution& sol) {
  const VecX& v = sol.V.values();
  const double h = sol.grid.h();
  auto sq = [](const Density& r) { return integrate(r.grid(), r.values().cwiseAbs2()); };
  // |rho'|^2 + rho rho' V' = rho' (rho' + rho V'), summed over interior
  // interfaces with the same flux as the time step.
  auto rate = [&](const Density& r) {
    double acc = 0;
    for (Index i = 0; i + 1 < r.grid().n(); ++i) {
      const double dV = v[i + 1] - v[i];
      const double flux = (bernoulli(-dV) * r[i + 1] - bernoulli(dV) * r[i]) / h;
      acc += (r[i + 1] - r[i]) * flux;
    }
    return 2 * acc;
  };
  DissipationBalance out;
  out.change = sq(sol.densities.back()) - sq(sol.densities.front());
  out.dissipation = trapezoid(sol, rate);
  out.residual = std::abs(out.change + out.dissipation);
  return out;
}

double f2_dissipation_rate(const Density& rho, const Potential& V) {
  const GridFunction u = log_gibbs_ratio(rho, V);
  const VecX du = deriv1(u).values();
  const VecX d2u = deriv2(u).values();
  const VecX d2V = deriv2(V.V()).values();
  return integrate(rho.grid(),
                   ((d2u.array().square() + du.array().square() * d2V.array()) * rho.values().array()).matrix());
}

DissipationBalance dissipation_F2(const FPSolution& sol, const Potential& V) {
  DissipationBalance out;
  out.change = fisher_Fp(sol.densities.back(), V, 2) - fisher_Fp(sol.densities.front(), V, 2);
  out.dissipation = trapezoid(sol, [&](const Density& r) { return f2_dissipation_rate(r, V); });
  out.residual = std::abs(out.change + out.dissipation);
  return out;
}

}  // namespace jkofp
