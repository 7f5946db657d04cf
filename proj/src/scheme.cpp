#include "jkofp/scheme.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace jkofp {

void JKOConfig::validate(const Potential& V) const {
  if (!(tau > 0)) throw InvalidArgument("jko: tau must be positive");
  if (!(newton_tol > 0)) throw InvalidArgument("jko: newton_tol must be positive");
  if (max_newton < 1) throw InvalidArgument("jko: max_newton must be >= 1");
  if (!(damping > 0 && damping < 1)) throw InvalidArgument("jko: damping must lie in (0, 1)");
  if (!(1 + 2 * V.lambda() * tau > 0)) throw SmallnessViolated("jko: 1 + 2 lambda tau <= 0; reduce tau");
}

StepObjective::StepObjective(const Density& prev, const Potential& V, double tau)
    : grid_(prev.grid()), prev_(prev), prev_curve_(prev), V_(V.values()), tau_(tau) {
  if (!(V.grid() == grid_)) throw InvalidArgument("jko: density and potential on different grids");
}

VecX StepObjective::coordinates(const Density& rho) const {
  const Index n = grid_.n();
  VecX F(n - 1);
  double acc = 0;
  for (Index i = 0; i + 1 < n; ++i) {
    acc += grid_.h() * rho[i];
    F[i] = acc;
  }
  return F;
}

VecX StepObjective::full_knots(const VecX& F) const {
  const Index n = grid_.n();
  VecX full(n + 1);
  full[0] = 0;
  full.segment(1, n - 1) = F;
  full[n] = 1;
  return full;
}

VecX StepObjective::increments(const VecX& F) const {
  const VecX full = full_knots(F);
  const Index n = grid_.n();
  return full.tail(n) - full.head(n);
}

bool StepObjective::admissible(const VecX& F) const {
  return F.allFinite() && increments(F).minCoeff() > 0;
}

Density StepObjective::density(const VecX& F, double floor) const {
  return Density(GridFunction(grid_, increments(F) / grid_.h()), floor);
}

double StepObjective::value(const VecX& F) const {
  const VecX D = increments(F);
  const double h = grid_.h();
  const double entropy = (D.array() * ((D.array() / h).log() + V_.array())).sum();
  const QuantileCurve curve(grid_, full_knots(F));
  return entropy + w2_squared(curve, prev_curve_) / (2 * tau_);
}

void StepObjective::residual_moments(const VecX& F, VecX& r_theta, VecX& r_comp) const {
  const Index n = grid_.n();
  const double h = grid_.h();
  const VecX full = full_knots(F);
  const VecX& Fp = prev_curve_.knots();
  const VecX& Xp = prev_curve_.values();
  r_theta = VecX::Zero(n);
  r_comp = VecX::Zero(n);

  Index i = 0, j = 0;
  double lo = 0;
  while (i < n && j < n) {
    const double hi = std::min(full[i + 1], Fp[j + 1]);
    if (hi > lo) {
      const double D = full[i + 1] - full[i];
      const double pslope = (Xp[j + 1] - Xp[j]) / (Fp[j + 1] - Fp[j]);
      auto r = [&](double s) { return grid_.edge(i) + h * (s - full[i]) / D - (Xp[j] + (s - Fp[j]) * pslope); };
      const double ru = r(lo), rv = r(hi);
      const double tu = (lo - full[i]) / D, tv = (hi - full[i]) / D;
      // Exact integral of a product of two linear functions on [lo, hi].
      auto prod = [&](double fu, double fv, double gu, double gv) {
        return (hi - lo) / 6.0 * (2 * fu * gu + fu * gv + fv * gu + 2 * fv * gv);
      };
      r_theta[i] += prod(ru, rv, tu, tv);
      r_comp[i] += prod(ru, rv, 1 - tu, 1 - tv);
      lo = hi;
    }
    if (full[i + 1] <= hi) ++i;
    if (Fp[j + 1] <= hi) ++j;
  }
}

VecX StepObjective::gradient(const VecX& F) const {
  const Index n = grid_.n();
  const double h = grid_.h();
  const VecX D = increments(F);
  VecX r_theta, r_comp;
  residual_moments(F, r_theta, r_comp);
  const VecX u = (D.array() / h).log().matrix() + V_;
  VecX g(n - 1);
  for (Index j = 1; j < n; ++j) {
    const double w2 = -2 * h * (r_theta[j - 1] / D[j - 1] + r_comp[j] / D[j]);
    g[j - 1] = (u[j - 1] - u[j]) + w2 / (2 * tau_);
  }
  return g;
}

Tridiagonal StepObjective::hessian(const VecX& F) const {
  const Index n = grid_.n();
  const double h = grid_.h();
  const VecX D = increments(F);
  const VecX full = full_knots(F);
  VecX r_theta, r_comp;
  residual_moments(F, r_theta, r_comp);
  const double c = 1 / (2 * tau_);

  Tridiagonal H(n - 1);
  for (Index j = 1; j < n; ++j) {
    const double dl = D[j - 1], dr = D[j];
    const double r_knot = grid_.edge(j) - prev_curve_(full[j]);
    const double w2 = 2 * h * h / (3 * dl) + 2 * h * h / (3 * dr) + 4 * h * r_theta[j - 1] / (dl * dl) -
                      4 * h * r_comp[j] / (dr * dr) - 2 * h * r_knot * (1 / dl - 1 / dr);
    H.diag[j - 1] = 1 / dl + 1 / dr + c * w2;
  }
  for (Index j = 1; j + 1 < n; ++j) {
    const double d = D[j];
    const double w2 = h * h / (3 * d) - 2 * h * (r_theta[j] - r_comp[j]) / (d * d);
    H.upper[j - 1] = -1 / d + c * w2;
    H.lower[j - 1] = H.upper[j - 1];
  }
  return H;
}

JKOStepResult jko_step(const Density& rho_prev, const Potential& V, const JKOConfig& cfg) {
  cfg.validate(V);
  const StepObjective obj(rho_prev, V, cfg.tau);

  VecX F = obj.coordinates(rho_prev);
  double val = obj.value(F);
  VecX g = obj.gradient(F);
  int iters = 0;
  while (g.norm() > cfg.newton_tol) {
    if (iters >= cfg.max_newton) {
      throw NonConvergence("jko: Newton did not reach tolerance in " + std::to_string(cfg.max_newton) +
                           " iterations (|grad| = " + std::to_string(g.norm()) + ")");
    }
    ++iters;
    VecX dir = solve(obj.hessian(F), VecX(-g));
    double slope = g.dot(dir);
    if (!(slope < 0)) {
      dir = -g;
      slope = -g.squaredNorm();
    }

    double alpha = 1;
    VecX trial = F + dir;
    while (!obj.admissible(trial)) {
      alpha *= cfg.damping;
      if (alpha < 1e-16) throw MonotonicityLoss("jko: backtracking cannot keep cell masses positive");
      trial = F + alpha * dir;
    }
    double tv = obj.value(trial);
    // Below this decrement the objective cannot resolve further decrease in
    // double precision; the full Newton step is taken on the gradient alone.
    const bool roundoff = -slope < 1e-13 * (1 + std::abs(val));
    while (!roundoff && tv > val + 1e-4 * alpha * slope) {
      alpha *= cfg.damping;
      if (alpha < 1e-14) throw NonConvergence("jko: line search failed");
      trial = F + alpha * dir;
      tv = obj.value(trial);
    }
    F = std::move(trial);
    val = tv;
    g = obj.gradient(F);
  }

  Density next = obj.density(F, rho_prev.floor());
  JKOStepResult out{next, optimal_plan(next, rho_prev)};
  out.tau = cfg.tau;
  out.J_prev = entropy_J(rho_prev, V);
  out.J_next = entropy_J(out.rho_next, V);
  out.w2 = out.plan.w2;
  const VecX q = log_gibbs_ratio(out.rho_next, V).values() + out.plan.phi.values() / cfg.tau;
  out.optimality_offset = q.mean();
  out.optimality_residual = std::sqrt((q.array() - q.mean()).square().mean());
  out.gradient_norm = g.norm();
  out.newton_iters = iters;
  return out;
}

Index JKOTrajectory::index_at(double t) const {
  if (t <= 0) return 0;
  const double u = t / tau;
  Index k = static_cast<Index>(std::ceil(u - 1e-9)) - 1;
  k = std::clamp<Index>(k, 0, N() - 1);
  return k + 1;
}

JKOTrajectory run_trajectory(const Density& rho0, const Potential& V, double T, const JKOConfig& cfg) {
  cfg.validate(V);
  const double steps = T / cfg.tau;
  const double N = std::round(steps);
  if (!(T > 0) || std::abs(N * cfg.tau - T) > 1e-9 * std::max(1.0, T)) {
    throw InvalidArgument("run_trajectory: horizon must be a positive integer multiple of tau");
  }
  JKOTrajectory traj;
  traj.tau = cfg.tau;
  traj.densities.reserve(static_cast<size_t>(N) + 1);
  traj.steps.reserve(static_cast<size_t>(N));
  traj.densities.push_back(rho0);
  for (Index k = 0; k < static_cast<Index>(N); ++k) {
    traj.steps.push_back(jko_step(traj.densities.back(), V, cfg));
    traj.densities.push_back(traj.steps.back().rho_next);
  }
  return traj;
}

InterpolatedCurve::InterpolatedCurve(const JKOTrajectory& base, double eps)
    : tau_(base.tau), rho_(base.densities), eps_(eps) {
  if (!(eps > 0 && eps < 1)) throw InvalidArgument("interpolate_eps: eps must lie in (0, 1)");
  if (rho_.size() < 2) throw InvalidArgument("interpolate_eps: empty trajectory");
}

VecX InterpolatedCurve::eval(double t) const {
  const Index N = static_cast<Index>(rho_.size()) - 1;
  if (t <= 0) return rho_.front().values();
  Index k = std::clamp<Index>(static_cast<Index>(std::ceil(t / tau_ - 1e-9)) - 1, 0, N - 1);
  if (k == N - 1) return rho_.back().values();
  const double start = static_cast<double>(k) * tau_ + (1 - eps_) * tau_;
  const VecX& lo = rho_[static_cast<size_t>(k + 1)].values();
  if (t <= start) return lo;
  const VecX& hi = rho_[static_cast<size_t>(k + 2)].values();
  const double end = static_cast<double>(k + 1) * tau_;
  return lo * ((end - t) / (eps_ * tau_)) + hi * ((t - start) / (eps_ * tau_));
}

double InterpolatedCurve::l2l2_distance() const {
  static constexpr std::array<double, 3> kNodes = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr std::array<double, 3> kWeights = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const Index N = static_cast<Index>(rho_.size()) - 1;
  const Grid1D& grid = rho_.front().grid();
  double acc = 0;
  auto gauss = [&](double t0, double t1) {
    const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
    for (size_t q = 0; q < kNodes.size(); ++q) {
      const double t = mid + half * kNodes[q];
      const Index k = std::clamp<Index>(static_cast<Index>(std::ceil(t / tau_ - 1e-9)) - 1, 0, N - 1);
      const VecX diff = eval(t) - rho_[static_cast<size_t>(k + 1)].values();
      acc += half * kWeights[q] * grid.h() * diff.squaredNorm();
    }
  };
  for (Index k = 0; k < N; ++k) {
    const double t0 = static_cast<double>(k) * tau_;
    const double split = t0 + (1 - eps_) * tau_;
    gauss(t0, split);
    gauss(split, t0 + tau_);
  }
  return std::sqrt(acc);
}

double InterpolatedCurve::l2l2_distance_closed_form() const {
  const Index N = static_cast<Index>(rho_.size()) - 1;
  const double h = rho_.front().grid().h();
  double acc = 0;
  for (Index k = 0; k + 2 <= N; ++k) {
    acc += tau_ * h * (rho_[static_cast<size_t>(k + 2)].values() - rho_[static_cast<size_t>(k + 1)].values()).squaredNorm();
  }
  return std::sqrt(eps_ / 3 * acc);
}

InterpolatedCurve interpolate_eps(const JKOTrajectory& traj, double eps) { return InterpolatedCurve(traj, eps); }

}  // namespace jkofp
