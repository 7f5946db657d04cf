#include "jkofp/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace jkofp {

Density::Density(GridFunction f, double floor) : f_(std::move(f)), floor_(floor) {
  if (!(floor_ > 0)) throw InvalidDensity("density: floor must be positive");
  const double lo = f_.values().minCoeff();
  if (lo < floor_) throw InvalidDensity("density: value " + std::to_string(lo) + " below floor");
  const double mass = integrate(f_);
  if (std::abs(mass - 1.0) > kMassTol) throw InvalidDensity("density: mass " + std::to_string(mass) + " != 1");
}

Density Density::from_profile(const GridFunction& profile, double floor) {
  const Grid1D& g = profile.grid();
  VecX v = profile.values().cwiseMax(0.0);
  const double mass = integrate(g, v);
  if (!(mass > 0)) throw InvalidDensity("density: profile has no positive mass");
  const double floor_mass = floor * g.length();
  if (floor_mass >= 1) throw InvalidDensity("density: floor too large for the domain");
  v = (1.0 - floor_mass) / mass * v.array() + floor;
  // One more rescale absorbs the roundoff of the blend.
  v /= integrate(g, v);
  v = v.cwiseMax(floor);
  return Density(profile.with_values(v), floor);
}

Density Density::normalized(const GridFunction& f, double floor) {
  const double mass = integrate(f);
  if (!(mass > 0)) throw InvalidDensity("density: nonpositive mass");
  return Density(f.with_values(f.values() / mass), floor);
}

Density Density::uniform(const Grid1D& grid, double floor) {
  return Density(GridFunction::constant(grid, 1.0 / grid.length()), floor);
}

Potential::Potential(GridFunction V, double lip, double lambda) : V_(std::move(V)), lip_(lip), lambda_(lambda) {
  if (!(lip_ >= 0) || !std::isfinite(lip_)) throw InvalidArgument("potential: lip must be finite and >= 0");
  if (!std::isfinite(lambda_)) throw InvalidArgument("potential: lambda must be finite");
  const double slope = deriv1(V_).values().cwiseAbs().maxCoeff();
  if (slope > lip_ * (1 + 1e-9) + 1e-12) throw InvalidArgument("potential: lip below max |V'|");
  const double curv = deriv2(V_).values().minCoeff();
  if (curv < lambda_ - 1e-6 * (1 + std::abs(lambda_))) throw InvalidArgument("potential: lambda above min V''");
}

Potential Potential::from_samples(GridFunction V) {
  const double lip = deriv1(V).values().cwiseAbs().maxCoeff();
  const double lambda = deriv2(V).values().minCoeff();
  return Potential(std::move(V), lip, lambda);
}

Potential zero_potential(const Grid1D& grid) { return Potential(GridFunction(grid), 0.0, 0.0); }

Potential quadratic_potential(const Grid1D& grid, double center, double strength) {
  auto V = GridFunction::sample(grid, [&](double x) { return strength * (x - center) * (x - center); });
  const double reach = std::max(std::abs(grid.a() - center), std::abs(grid.b() - center));
  const double lip = std::max(2 * std::abs(strength) * reach, deriv1(V).values().cwiseAbs().maxCoeff());
  const double lambda = std::min(2 * strength, deriv2(V).values().minCoeff());
  return Potential(std::move(V), lip, lambda);
}

Potential double_well_potential(const Grid1D& grid, double center, double width, double strength) {
  auto value = [&](double x) {
    const double q = (x - center) * (x - center) - width * width;
    return strength * q * q;
  };
  auto slope = [&](double x) { return 4 * strength * (x - center) * ((x - center) * (x - center) - width * width); };
  auto V = GridFunction::sample(grid, value);
  // |V'| is a cubic; its max over [a, b] sits at an endpoint or a critical point.
  double lip = std::max(std::abs(slope(grid.a())), std::abs(slope(grid.b())));
  for (double sgn : {-1.0, 1.0}) {
    const double x = center + sgn * width / std::sqrt(3.0);
    if (x > grid.a() && x < grid.b()) lip = std::max(lip, std::abs(slope(x)));
  }
  lip = std::max(lip, deriv1(V).values().cwiseAbs().maxCoeff());
  // V'' = strength (12 (x-c)^2 - 4 w^2) is minimized at the point of [a,b] nearest c.
  const double xc = std::clamp(center, grid.a(), grid.b());
  double lambda = strength * (12 * (xc - center) * (xc - center) - 4 * width * width);
  if (strength < 0) {
    const double reach = std::max(std::abs(grid.a() - center), std::abs(grid.b() - center));
    lambda = strength * (12 * reach * reach - 4 * width * width);
  }
  lambda = std::min(lambda, deriv2(V).values().minCoeff());
  return Potential(std::move(V), lip, lambda);
}

double entropy_J(const Density& rho, const Potential& V) {
  const VecX& r = rho.values();
  if (r.minCoeff() < rho.floor()) throw InvalidDensity("entropy_J: density below floor");
  return integrate(rho.grid(), (r.array() * (r.array().log() + V.values().array())).matrix());
}

GridFunction log_gibbs_ratio(const Density& rho, const Potential& V) {
  return rho.f().with_values(rho.values().array().log().matrix() + V.values());
}

double fisher_Fp(const Density& rho, const Potential& V, double p) {
  if (!(p >= 2)) throw InvalidArgument("fisher_Fp: p must be >= 2");
  const VecX grad = deriv1(log_gibbs_ratio(rho, V)).values();
  return integrate(rho.grid(), (grad.array().abs().pow(p) * rho.values().array()).matrix()) / p;
}

Density gibbs_density(const Potential& V, double floor) {
  const VecX& v = V.values();
  const VecX w = (-(v.array() - v.minCoeff())).exp();
  return Density::normalized(V.V().with_values(w), floor);
}

}  // namespace jkofp
