#include "jkofp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>

#include "jkofp/errors.hpp"
#include "jkofp/fokker_planck.hpp"

namespace jkofp {

namespace {

InequalityReport make_inequality(std::string name, double lhs, double rhs, double tol, long step, double tau) {
  InequalityReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.margin = lhs - rhs;
  r.tol = tol;
  r.satisfied = r.margin >= -tol;
  r.step = step;
  r.tau = tau;
  return r;
}

double lp_integral(const Density& rho, double p) {
  return integrate(rho.grid(), rho.values().array().pow(p).matrix());
}

double hessian_sup(const TransportPlan& plan) { return deriv2(plan.phi).values().cwiseAbs().maxCoeff(); }

}  // namespace

void to_json(nlohmann::json& j, const InequalityReport& r) {
  j = nlohmann::json{{"name", r.name},     {"kind", r.kind}, {"lhs", r.lhs},
                     {"rhs", r.rhs},       {"margin", r.margin}, {"tol", r.tol},
                     {"satisfied", r.satisfied}, {"context", {{"step", r.step}, {"tau", r.tau}}}};
  if (!r.details.empty()) j["details"] = r.details;
}

void to_json(nlohmann::json& j, const LogLogFit& f) {
  j = nlohmann::json{{"slope", f.slope}, {"log_constant", f.log_constant}, {"residual", f.residual}};
}

void to_json(nlohmann::json& j, const ScalingReport& r) {
  j = nlohmann::json{{"taus", r.taus},
                     {"displacement", r.displacement},
                     {"w2", r.w2},
                     {"hessian", r.hessian},
                     {"exponent_vs_tau", r.vs_tau},
                     {"exponent_vs_w2", r.vs_w2},
                     {"hessian_vs_tau", r.hessian_vs_tau},
                     {"target_vs_tau", r.target_vs_tau},
                     {"target_vs_w2", r.target_vs_w2},
                     {"beta_hessian", r.beta_hessian},
                     {"degenerate", r.degenerate},
                     {"satisfied", r.satisfied}};
}

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InsufficientData("fit_loglog: need at least two points");
  const Index n = static_cast<Index>(x.size());
  Eigen::MatrixX2d A(n, 2);
  VecX rhs(n);
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<size_t>(i);
    if (!(x[k] > 0) || !(y[k] > 0)) throw InvalidArgument("fit_loglog: values must be positive");
    A(i, 0) = std::log(x[k]);
    A(i, 1) = 1.0;
    rhs[i] = std::log(y[k]);
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(rhs);
  LogLogFit fit;
  fit.slope = c[0];
  fit.log_constant = c[1];
  fit.residual = std::sqrt((A * c - rhs).squaredNorm() / static_cast<double>(n));
  return fit;
}

InequalityReport check_five_gradients(const Density& rho, const Density& g, double p, const TransportPlan& plan) {
  if (!(p > 1)) throw InvalidArgument("check_five_gradients: p must exceed 1");
  const Grid1D& gx = rho.grid();
  const Grid1D& gy = g.grid();
  const auto Hp = [p](double z) { return std::pow(std::abs(z), p - 2) * z; };
  const auto Hpp = [p](double z) { return (p - 1) * std::pow(std::abs(z), p - 2); };

  const VecX dphi = gx.nodes() - plan.T.values();
  const VecX dpsi = gy.nodes() - plan.S.values();
  const VecX d2phi = deriv2(plan.phi).values();
  const VecX drho = deriv1(rho.f()).values();
  const VecX dg = deriv1(g.f()).values();

  VecX left_x(gx.n()), interior(gx.n());
  for (Index i = 0; i < gx.n(); ++i) {
    const double stretch = 1 - d2phi[i];
    if (!(stretch > 0)) throw MonotonicityLoss("check_five_gradients: 1 - phi'' <= 0 at cell " + std::to_string(i));
    left_x[i] = drho[i] * Hp(dphi[i]);
    interior[i] = rho[i] * Hpp(dphi[i]) * d2phi[i] * d2phi[i] / stretch;
  }
  VecX left_y(gy.n());
  for (Index i = 0; i < gy.n(); ++i) left_y[i] = dg[i] * Hp(dpsi[i]);

  // Outward normals: -1 at a, +1 at b. Endpoint displacements use exact maps.
  const double bnd_rho_a = -rho[0] * Hp(gx.a() - plan.T_left);
  const double bnd_rho_b = rho[gx.n() - 1] * Hp(gx.b() - plan.T_right);
  const double bnd_g_a = -g[0] * Hp(gy.a() - plan.S_left);
  const double bnd_g_b = g[gy.n() - 1] * Hp(gy.b() - plan.S_right);
  const double boundary = bnd_rho_a + bnd_rho_b + bnd_g_a + bnd_g_b;

  const double lhs = integrate(gx, left_x) + integrate(gy, left_y);
  const double inner = integrate(gx, interior);

  InequalityReport r;
  r.name = "five_gradients";
  r.kind = "identity";
  r.lhs = lhs;
  r.rhs = inner + boundary;
  r.margin = r.lhs - r.rhs;
  r.tol = 1e-3 * (1 + std::abs(lhs));
  const double sign_tol = 1e-8;
  const double min_boundary = std::min({bnd_rho_a, bnd_rho_b, bnd_g_a, bnd_g_b});
  r.satisfied = std::abs(r.margin) <= r.tol && inner >= -sign_tol && min_boundary >= -sign_tol;
  r.details = {{"p", p},
               {"interior_remainder", inner},
               {"boundary_remainder", boundary},
               {"boundary_rho_a", bnd_rho_a},
               {"boundary_rho_b", bnd_rho_b},
               {"boundary_g_a", bnd_g_a},
               {"boundary_g_b", bnd_g_b},
               {"min_stretch", (1 - d2phi.array()).minCoeff()}};
  return r;
}

InequalityReport check_flow_interchange(const JKOStepResult& step, const Potential& V) {
  const Density& next = step.rho_next;
  const Density& prev = step.plan.target;
  const VecX dr = deriv1(next.f()).values();
  const VecX dV = deriv1(V.V()).values();
  const double dissipation =
      integrate(next.grid(), (dr.array().square() + next.values().array() * dr.array() * dV.array()).matrix());
  const double lhs = lp_integral(prev, 2);
  const double rhs = lp_integral(next, 2) + 2 * step.tau * dissipation;
  InequalityReport r = make_inequality("flow_interchange", lhs, rhs, 1e-6, -1, step.tau);
  r.details = {{"dissipation", dissipation}};
  return r;
}

InequalityReport check_lp_decay(const JKOStepResult& step, const Potential& V, double p) {
  if (!(p >= 1)) throw InvalidArgument("check_lp_decay: p must be >= 1");
  const double shrink = step.tau * p * (p - 1) * V.lip() * V.lip() / 4;
  if (!(shrink < 1)) throw SmallnessViolated("check_lp_decay: tau p (p-1) Lip(V)^2 / 4 >= 1");
  const double factor = 1 - shrink;
  const double lhs = lp_integral(step.plan.target, p);
  const double rhs = factor * lp_integral(step.rho_next, p);
  InequalityReport r = make_inequality("lp_decay", lhs, rhs, 1e-8, -1, step.tau);
  r.details = {{"p", p}, {"factor", factor}};
  return r;
}

InequalityReport check_w2_telescope(const JKOTrajectory& traj, const Potential& V) {
  if (traj.densities.empty()) throw InvalidArgument("check_w2_telescope: empty trajectory");
  const double J0 = entropy_J(traj.densities.front(), V);
  const double Jinf = entropy_J(gibbs_density(V, traj.densities.front().floor()), V);
  double sum = 0;
  for (const auto& s : traj.steps) sum += s.w2 * s.w2 / traj.tau;
  InequalityReport r = make_inequality("w2_telescope", 2 * (J0 - Jinf), sum, 1e-6, -1, traj.tau);
  r.details = {{"J0", J0}, {"J_inf", Jinf}, {"steps", static_cast<double>(traj.N())}};
  return r;
}

std::vector<InequalityReport> check_fp_decay(const JKOTrajectory& traj, const Potential& V, double p) {
  const double factor = 1 + p * V.lambda() * traj.tau;
  if (!(factor > 0)) throw SmallnessViolated("check_fp_decay: 1 + p lambda tau <= 0");
  std::vector<InequalityReport> out;
  out.reserve(static_cast<size_t>(traj.N()));
  double Fk = fisher_Fp(traj.densities.front(), V, p);
  for (Index k = 0; k < traj.N(); ++k) {
    const double Fnext = fisher_Fp(traj.densities[static_cast<size_t>(k) + 1], V, p);
    InequalityReport r = make_inequality("fp_decay", Fk, factor * Fnext, 1e-6 * (1 + Fk), k, traj.tau);
    r.details = {{"p", p}, {"factor", factor}};
    out.push_back(std::move(r));
    Fk = Fnext;
  }
  return out;
}

InequalityReport check_maxmin(const JKOTrajectory& traj, const Potential& V) {
  if (traj.densities.empty()) throw InvalidArgument("check_maxmin: empty trajectory");
  const VecX u0 = log_gibbs_ratio(traj.densities.front(), V).values();
  const double lo = u0.minCoeff();
  const double hi = u0.maxCoeff();
  double worst = traj.densities.size() > 1 ? std::numeric_limits<double>::infinity() : 0.0;
  double last_lo = lo, last_hi = hi;
  long worst_step = 0;
  for (size_t k = 1; k < traj.densities.size(); ++k) {
    const VecX u = log_gibbs_ratio(traj.densities[k], V).values();
    const double gap = std::min(u.minCoeff() - lo, hi - u.maxCoeff());
    if (gap < worst) {
      worst = gap;
      worst_step = static_cast<long>(k);
    }
    last_lo = u.minCoeff();
    last_hi = u.maxCoeff();
  }
  // Encoded as lhs = worst gap to the band edges, rhs = 0.
  InequalityReport r = make_inequality("maxmin_band", worst, 0.0, 1e-5, -1, traj.tau);
  r.details = {{"a", lo}, {"b", hi}, {"final_min", last_lo}, {"final_max", last_hi},
               {"worst_step", static_cast<double>(worst_step)}};
  return r;
}

ScalingReport fit_displacement_scaling(const std::vector<const JKOTrajectory*>& trajs) {
  if (trajs.size() < 4) throw InsufficientData("fit_displacement_scaling: need at least four values of tau");
  ScalingReport r;
  for (const JKOTrajectory* t : trajs) {
    double disp = 0, w2 = 0, hess = 0;
    for (const auto& s : t->steps) {
      disp = std::max(disp, displacement_sup(s.plan));
      w2 = std::max(w2, s.w2);
      hess = std::max(hess, hessian_sup(s.plan));
    }
    r.taus.push_back(t->tau);
    r.displacement.push_back(disp);
    r.w2.push_back(w2);
    r.hessian.push_back(hess);
  }
  const double tiny = 1e-12;
  const bool degenerate = std::any_of(r.displacement.begin(), r.displacement.end(), [&](double d) { return d < tiny; }) ||
                          std::any_of(r.w2.begin(), r.w2.end(), [&](double d) { return d < tiny; }) ||
                          std::any_of(r.hessian.begin(), r.hessian.end(), [&](double d) { return d < tiny; });
  if (degenerate) {
    r.degenerate = true;
    r.satisfied = true;
    return r;
  }
  r.vs_tau = fit_loglog(r.taus, r.displacement);
  r.vs_w2 = fit_loglog(r.w2, r.displacement);
  r.hessian_vs_tau = fit_loglog(r.taus, r.hessian);
  r.beta_hessian = r.hessian_vs_tau.slope;
  r.satisfied = r.vs_tau.slope >= r.target_vs_tau - 0.1 && r.vs_w2.slope >= r.target_vs_w2 - 0.1 &&
                r.beta_hessian > 0;
  return r;
}

InequalityReport check_f2_dissipation_jko(const JKOTrajectory& traj, const Potential& V) {
  if (traj.densities.empty()) throw InvalidArgument("check_f2_dissipation_jko: empty trajectory");
  const double lhs = fisher_Fp(traj.densities.front(), V, 2) - fisher_Fp(traj.densities.back(), V, 2);
  double rhs = 0;
  for (size_t k = 1; k < traj.densities.size(); ++k) rhs += traj.tau * f2_dissipation_rate(traj.densities[k], V);
  InequalityReport r = make_inequality("f2_dissipation", lhs, rhs, 0.0, -1, traj.tau);
  const double delta = std::abs(r.margin);
  r.tol = 1e-8 + 1e-3 * std::abs(lhs);
  r.satisfied = r.margin >= -r.tol;
  r.details = {{"delta", delta}};
  return r;
}

InequalityReport check_f2_defect_family(const std::vector<InequalityReport>& reports) {
  InequalityReport r;
  r.name = "f2_defect_decay";
  r.satisfied = true;
  double worst = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < reports.size(); ++i) {
    const double d = reports[i].details.at("delta");
    r.details["delta_" + std::to_string(i)] = d;
    if (i == 0) continue;
    const double prev = reports[i - 1].details.at("delta");
    if (!(reports[i].tau < reports[i - 1].tau)) throw InvalidArgument("check_f2_defect_family: taus must decrease");
    worst = std::min(worst, prev - d);
    if (!(d < prev)) r.satisfied = false;
  }
  if (reports.size() >= 2) {
    r.lhs = reports.front().details.at("delta");
    r.rhs = reports.back().details.at("delta");
    r.margin = worst;
  }
  const bool flat = std::all_of(reports.begin(), reports.end(),
                                [](const InequalityReport& x) { return x.details.at("delta") < 1e-12; });
  if (flat) r.satisfied = true;
  return r;
}

std::vector<InequalityReport> run_suite(const JKOTrajectory& traj, const Potential& V, const SuiteOptions& opts) {
  std::vector<InequalityReport> out;
  for (Index k = 0; k < traj.N(); ++k) {
    const JKOStepResult& s = traj.steps[static_cast<size_t>(k)];
    out.push_back(check_flow_interchange(s, V));
    out.back().step = k;
    for (double p : opts.lp_exponents) {
      out.push_back(check_lp_decay(s, V, p));
      out.back().step = k;
    }
  }
  for (double p : opts.fisher_exponents) {
    auto fp = check_fp_decay(traj, V, p);
    out.insert(out.end(), fp.begin(), fp.end());
  }
  out.push_back(check_maxmin(traj, V));
  out.push_back(check_w2_telescope(traj, V));
  out.push_back(check_f2_dissipation_jko(traj, V));
  return out;
}

bool all_satisfied(const std::vector<InequalityReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const InequalityReport& r) { return r.satisfied; });
}

}  // namespace jkofp
