#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "jkofp/scheme.hpp"

using namespace jkofp;

namespace {

Density cosine(const Grid1D& g, double amp) {
  return Density::from_function(g, [&](double x) { return 1 + amp * std::cos(M_PI * x); });
}

Density gibbs_cosine(const Grid1D& g, const Potential& V, double amp) {
  const GridFunction bump = GridFunction::sample(g, [&](double x) { return 1 + amp * std::cos(M_PI * x); });
  return Density::from_profile(bump.with_values((-V.values().array()).exp().matrix().cwiseProduct(bump.values())));
}

// The step objective assembled from the public functionals only.
double independent_objective(const Grid1D& g, const VecX& F, const Density& prev, const Potential& V, double tau) {
  const Index n = g.n();
  VecX rho(n);
  double left = 0;
  for (Index i = 0; i < n; ++i) {
    const double right = i + 1 < n ? F[i] : 1.0;
    rho[i] = (right - left) / g.h();
    left = right;
  }
  if (rho.minCoeff() <= 0) return std::numeric_limits<double>::infinity();
  const Density r(GridFunction(g, rho), 1e-300);
  const double w2 = w2_distance(r, prev);
  return entropy_J(r, V) + w2 * w2 / (2 * tau);
}

VecX fd_gradient(const Grid1D& g, const VecX& F, const Density& prev, const Potential& V, double tau, double eps) {
  VecX grad(F.size());
  for (Index j = 0; j < F.size(); ++j) {
    VecX up = F, dn = F;
    up[j] += eps;
    dn[j] -= eps;
    grad[j] = (independent_objective(g, up, prev, V, tau) - independent_objective(g, dn, prev, V, tau)) / (2 * eps);
  }
  return grad;
}

// Quasi-Newton minimization with finite-difference gradients of the
// independently assembled objective.
VecX brute_force_minimize(const Grid1D& g, VecX F, const Density& prev, const Potential& V, double tau) {
  const Index d = F.size();
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(d, d) * 1e-4;
  double f = independent_objective(g, F, prev, V, tau);
  VecX grad = fd_gradient(g, F, prev, V, tau, 1e-7);
  for (int it = 0; it < 2000 && grad.norm() > 1e-10; ++it) {
    VecX dir = -Hinv * grad;
    if (dir.dot(grad) >= 0) {
      Hinv = Eigen::MatrixXd::Identity(d, d) * 1e-4;
      dir = -Hinv * grad;
    }
    double t = 1;
    VecX trial = F + t * dir;
    double ft = independent_objective(g, trial, prev, V, tau);
    while (!(ft <= f + 1e-4 * t * grad.dot(dir)) && t > 1e-20) {
      t *= 0.5;
      trial = F + t * dir;
      ft = independent_objective(g, trial, prev, V, tau);
    }
    const VecX gnew = fd_gradient(g, trial, prev, V, tau, 1e-7);
    const VecX s = trial - F, y = gnew - grad;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const double rho = 1 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    F = trial;
    f = ft;
    grad = gnew;
  }
  return F;
}

}  // namespace

TEST_CASE("JKOConfig validation") {
  const Grid1D g(0, 1, 64);
  JKOConfig c;
  CHECK_NOTHROW(c.validate(quadratic_potential(g, 0.5, 4)));
  c.tau = -1;
  CHECK_THROWS_AS(c.validate(zero_potential(g)), InvalidArgument);
  c.tau = 1.0;
  CHECK_THROWS_AS(c.validate(double_well_potential(g, 0.5, 0.4, 10)), SmallnessViolated);
  c.tau = 1e-3;
  c.damping = 1.5;
  CHECK_THROWS_AS(c.validate(zero_potential(g)), InvalidArgument);
}

TEST_CASE("jko_step: uniform with V = 0 is a fixed point") {
  const Grid1D g(0, 1, 128);
  JKOConfig c;
  const JKOStepResult s = jko_step(Density::uniform(g), zero_potential(g), c);
  CHECK(s.w2 <= 1e-8);
  CHECK(s.newton_iters <= 1);
  CHECK((s.rho_next.values().array() - 1).abs().maxCoeff() < 1e-10);
}

TEST_CASE("jko_step: Gibbs density is a fixed point") {
  const Grid1D g(0, 1, 256);
  const Potential V = quadratic_potential(g, 0.5, 4);
  const Density gd = gibbs_density(V);
  const JKOStepResult s = jko_step(gd, V, JKOConfig{});
  CHECK(s.w2 <= 1e-7);
  CHECK(sobolev_norm(gd.f().with_values(s.rho_next.values() - gd.values()), 0) <= 1e-7);
}

TEST_CASE("jko_step agrees with a brute-force minimizer of the same objective") {
  const Grid1D g(0, 1, 64);
  const Potential V = quadratic_potential(g, 0.5, 4);
  const Density prev = cosine(g, 0.3);
  JKOConfig c;
  c.tau = 1e-3;
  const JKOStepResult s = jko_step(prev, V, c);
  const StepObjective obj(prev, V, c.tau);
  const VecX F_newton = obj.coordinates(s.rho_next);
  const VecX F_brute = brute_force_minimize(g, obj.coordinates(prev), prev, V, c.tau);
  CHECK((F_newton - F_brute).cwiseAbs().maxCoeff() < 1e-6);
  const QuantileFn qn = quantile(s.rho_next, 64);
  const Density brute(GridFunction(g, [&] {
                        VecX r(g.n());
                        double left = 0;
                        for (Index i = 0; i < g.n(); ++i) {
                          const double right = i + 1 < g.n() ? F_brute[i] : 1.0;
                          r[i] = (right - left) / g.h();
                          left = right;
                        }
                        return r;
                      }()),
                      1e-12);
  CHECK((quantile(brute, 64).X - qn.X).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("objective gradient and Hessian match finite differences") {
  const Grid1D g(0, 1, 128);
  const Potential V = quadratic_potential(g, 0.5, 4);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(-0.25, 0.25);
  for (int t = 0; t < 10; ++t) {
    const double a = U(rng), b = U(rng), c = U(rng);
    const Density prev = Density::from_function(g, [&](double x) { return 1 + a * std::cos(M_PI * x) + b * std::sin(3 * x); });
    const Density cur = Density::from_function(g, [&](double x) { return 1 + c * std::cos(2 * M_PI * x); });
    const StepObjective obj(prev, V, 1e-3);
    const VecX F = obj.coordinates(cur);
    const VecX grad = obj.gradient(F);
    VecX fd(F.size());
    const double eps = 1e-7;
    for (Index j = 0; j < F.size(); ++j) {
      VecX up = F, dn = F;
      up[j] += eps;
      dn[j] -= eps;
      fd[j] = (obj.value(up) - obj.value(dn)) / (2 * eps);
    }
    CHECK((grad - fd).norm() / grad.norm() < 1e-6);

    const Tridiagonal H = obj.hessian(F);
    const Index j = F.size() / 2;
    VecX up = F, dn = F;
    up[j] += eps;
    dn[j] -= eps;
    const VecX col = (obj.gradient(up) - obj.gradient(dn)) / (2 * eps);
    VecX e = VecX::Zero(F.size());
    e[j] = 1;
    CHECK((H * e - col).norm() / col.norm() < 1e-5);
  }
}

TEST_CASE("jko_step: invariants on a generic step") {
  const Grid1D g(0, 1, 256);
  const Potential V = quadratic_potential(g, 0.5, 4);
  const Density prev = gibbs_cosine(g, V, 0.3);
  JKOConfig c;
  c.tau = 1e-3;
  const JKOStepResult s = jko_step(prev, V, c);
  CHECK(s.J_next + s.w2 * s.w2 / (2 * c.tau) <= s.J_prev + 1e-9);
  CHECK(s.gradient_norm <= c.newton_tol);
  CHECK(std::abs(integrate(s.rho_next.f()) - 1) < 1e-10);
  CHECK(std::isfinite(s.optimality_residual));
  CHECK(s.optimality_residual / std::abs(s.optimality_offset) <= 1e-4);

  const VecX u0 = log_gibbs_ratio(prev, V).values();
  const VecX u1 = log_gibbs_ratio(s.rho_next, V).values();
  CHECK(u1.minCoeff() >= u0.minCoeff() - 1e-6);
  CHECK(u1.maxCoeff() <= u0.maxCoeff() + 1e-6);

  // Stored plan goes from rho_next back to rho_prev.
  CHECK((s.plan.source.values() - s.rho_next.values()).norm() == 0.0);
  CHECK((s.plan.target.values() - prev.values()).norm() == 0.0);
  CHECK(std::abs(s.plan.w2 - s.w2) < 1e-14);
}

TEST_CASE("jko_step: L2 decay without potential") {
  const Grid1D g(0, 1, 128);
  const Potential V = zero_potential(g);
  Density cur = cosine(g, 0.5);
  for (int k = 0; k < 10; ++k) {
    const JKOStepResult s = jko_step(cur, V, JKOConfig{});
    CHECK(s.rho_next.values().squaredNorm() <= cur.values().squaredNorm());
    cur = s.rho_next;
  }
}

TEST_CASE("jko_step: non-convergence is reported") {
  const Grid1D g(0, 1, 128);
  JKOConfig c;
  c.max_newton = 1;
  c.newton_tol = 1e-14;
  CHECK_THROWS_AS(jko_step(cosine(g, 0.5), quadratic_potential(g, 0.5, 4), c), NonConvergence);
}

TEST_CASE("run_trajectory") {
  const Grid1D g(0, 1, 128);
  const Potential V = quadratic_potential(g, 0.5, 4);
  JKOConfig c;
  c.tau = 1e-3;
  CHECK_THROWS_AS(run_trajectory(gibbs_density(V), V, 0.0105, c), InvalidArgument);

  const JKOTrajectory fixed = run_trajectory(gibbs_density(V), V, 0.01, c);
  double sum = 0;
  for (const auto& s : fixed.steps) sum += s.w2 * s.w2;
  CHECK(sum <= 1e-10);

  const Density rho0 = cosine(g, 0.3);
  const JKOTrajectory tr = run_trajectory(rho0, V, 0.05, c);
  CHECK(tr.N() == 50);
  CHECK(tr.horizon() == doctest::Approx(0.05));
  const double Jinf = entropy_J(gibbs_density(V), V);
  double telescoped = 0;
  for (size_t k = 0; k < tr.steps.size(); ++k) {
    CHECK(tr.steps[k].J_next <= tr.steps[k].J_prev);
    telescoped += tr.steps[k].w2 * tr.steps[k].w2 / c.tau;
  }
  CHECK(telescoped <= 2 * (entropy_J(rho0, V) - Jinf) + 1e-6);

  CHECK(tr.index_at(0.0) == 0);
  CHECK(tr.index_at(1e-4) == 1);
  CHECK(tr.index_at(1e-3) == 1);
  CHECK(tr.index_at(1.5e-3) == 2);
  CHECK(tr.index_at(0.05) == 50);
}

TEST_CASE("run_trajectory: heat flow contracts toward uniform") {
  const Grid1D g(0, 1, 128);
  const Potential V = zero_potential(g);
  const Density rho0 = cosine(g, 0.3);
  JKOConfig c;
  c.tau = 1e-3;
  const JKOTrajectory tr = run_trajectory(rho0, V, 0.1, c);
  const Density u = Density::uniform(g);
  CHECK((tr.densities.back().values() - u.values()).norm() < (rho0.values() - u.values()).norm());
  // Mode amplitude close to the continuum decay e^{-pi^2 t}.
  const double amp = (tr.densities.back().values() - u.values()).cwiseAbs().maxCoeff();
  CHECK(amp == doctest::Approx(0.3 * std::exp(-M_PI * M_PI * 0.1)).epsilon(0.05));
}

TEST_CASE("interpolate_eps") {
  const Grid1D g(0, 1, 64);
  const Potential V = quadratic_potential(g, 0.5, 4);
  JKOConfig c;
  c.tau = 1e-2;
  const JKOTrajectory tr = run_trajectory(cosine(g, 0.3), V, 0.1, c);
  CHECK_THROWS_AS(interpolate_eps(tr, 0.0), InvalidArgument);
  CHECK_THROWS_AS(interpolate_eps(tr, 1.0), InvalidArgument);

  const InterpolatedCurve curve = interpolate_eps(tr, 0.25);
  const double tau = tr.tau;
  // Constant part of (k tau, k tau + (1 - eps) tau] equals rho_{k+1}.
  for (Index k = 0; k + 1 < tr.N(); ++k) {
    const double t0 = static_cast<double>(k) * tau;
    CHECK((curve.eval(t0 + 0.3 * tau) - tr.densities[static_cast<size_t>(k) + 1].values()).norm() == 0.0);
    CHECK((curve.eval(t0 + 0.75 * tau) - tr.densities[static_cast<size_t>(k) + 1].values()).norm() < 1e-12);
    const VecX mid = curve.eval(t0 + 0.875 * tau);
    const VecX expect = 0.5 * (tr.densities[static_cast<size_t>(k) + 1].values() + tr.densities[static_cast<size_t>(k) + 2].values());
    CHECK((mid - expect).norm() < 1e-12);
    CHECK(mid.minCoeff() > 0);
    CHECK(std::abs(integrate(g, mid) - 1) < 1e-10);
  }
  CHECK((curve.eval(tr.horizon() - 0.01 * tau) - tr.densities.back().values()).norm() == 0.0);

  for (double eps : {0.5, 0.25, 0.125}) {
    const InterpolatedCurve ce = interpolate_eps(tr, eps);
    CHECK(std::abs(ce.l2l2_distance() - ce.l2l2_distance_closed_form()) < 1e-8);
    CHECK(ce.l2l2_distance() / std::sqrt(eps) == doctest::Approx(curve.l2l2_distance() / std::sqrt(0.25)).epsilon(1e-6));
  }
}
