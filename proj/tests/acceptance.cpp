// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "jkofp/diagnostics.hpp"
#include "jkofp/fokker_planck.hpp"
#include "jkofp/study.hpp"

using namespace jkofp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
  std::printf("%s %2d %-34s %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs one criterion; an escaping exception counts as FAIL.
void criterion(int id, const std::string& title, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail += std::string(" exception: ") + e.what();
  }
  report(id, title, ok, detail);
}

std::string fmt(const char* f, double a) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Density tilted_cosine(const Potential& V, double amp) {
  const Grid1D& g = V.grid();
  VecX v(g.n());
  for (Index i = 0; i < g.n(); ++i) v[i] = std::exp(-V.values()[i]) * (1 + amp * std::cos(M_PI * g.node(i)));
  return Density::from_profile(GridFunction(g, v));
}

Density random_density(const Grid1D& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-0.25, 0.25);
  double c[5];
  for (double& x : c) x = U(rng);
  return Density::from_profile(GridFunction::sample(g, [&](double x) {
    double s = 1;
    for (int k = 0; k < 5; ++k) s += c[k] * std::cos((k + 1) * M_PI * x);
    return s;
  }));
}

double heat_error(Index n, double dt, double T) {
  const Grid1D g(0, 1, n);
  const Density r0 = Density::from_function(g, [](double x) { return 1 + 0.5 * std::cos(M_PI * x); });
  const FPSolution sol = fp_solve(r0, zero_potential(g), T, dt, 1 << 30);
  const VecX& last = sol.densities.back().values();
  const double amp = 0.5 * std::exp(-M_PI * M_PI * T);
  double worst = 0;
  for (Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(last[i] - 1 - amp * std::cos(M_PI * g.node(i))));
  return worst;
}

bool same_bits(const VecX& a, const VecX& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), static_cast<size_t>(a.size()) * sizeof(double)) == 0;
}

}  // namespace

int main() {
  criterion(1, "Gibbs fixed point", [](std::string& d) {
    const Grid1D g(0, 1, 256);
    const Potential V = quadratic_potential(g, 0.5, 4);
    const Density gd = gibbs_density(V);
    const auto t0 = Clock::now();
    const JKOStepResult s = jko_step(gd, V, JKOConfig{});
    const double secs = seconds_since(t0);
    const QuantileFn q = quantile(s.rho_next, 1024);
    const double l2 = std::sqrt(integrate(g, (s.rho_next.values() - gd.values()).cwiseAbs2().eval()));
    d = fmt("w2 %.2e", s.w2) + fmt("  L2 change %.2e", l2) + fmt("  %.3f s", secs);
    return s.w2 <= 1e-7 && l2 <= 1e-7 && secs < 1.0 && q.m == 1024;
  });

  criterion(2, "PDE oracle accuracy", [](std::string& d) {
    const auto t0 = Clock::now();
    const double linf = heat_error(512, 1e-5, 0.1);
    std::vector<double> dts{8e-4, 4e-4, 2e-4, 1e-4}, e_dt;
    for (double dt : dts) e_dt.push_back(heat_error(512, dt, 0.1));
    std::vector<double> hs, e_h;
    for (Index n : {8, 16, 32, 64}) {
      hs.push_back(1.0 / static_cast<double>(n));
      e_h.push_back(heat_error(n, 1e-6, 0.1));
    }
    const double p_dt = fit_loglog(dts, e_dt).slope, p_h = fit_loglog(hs, e_h).slope;
    const double secs = seconds_since(t0);
    d = fmt("Linf %.2e", linf) + fmt("  dt-order %.3f", p_dt) + fmt("  h-order %.3f", p_h) + fmt("  %.1f s", secs);
    return linf <= 5e-4 && p_dt >= 0.9 && p_h >= 1.9 && secs < 30;
  });

  // Criteria 3, 4, 7, 8 and 9 share one study.
  const Grid1D g(0, 1, 256);
  const Potential V = quadratic_potential(g, 0.5, 4);
  StudyConfig cfg(tilted_cosine(V, 0.3), V);
  cfg.T = 0.05;
  cfg.taus = {5e-3, 2.5e-3, 1.25e-3, 6.25e-4};
  StudyResult study;
  double study_secs = 0;
  std::string study_error;
  try {
    const auto t0 = Clock::now();
    study = run_study(cfg);
    study_secs = seconds_since(t0);
  } catch (const std::exception& e) {
    study_error = e.what();
  }
  auto need_study = [&]() {
    if (!study_error.empty()) throw Error("study failed: " + study_error);
  };
  auto column = [&](double TauErrors::*m) {
    std::vector<double> v;
    for (const TauRecord& r : study.records) v.push_back(r.errors.*m);
    return v;
  };
  auto decreasing = [](const std::vector<double>& v) {
    for (size_t i = 1; i < v.size(); ++i)
      if (!(v[i] < v[i - 1])) return false;
    return v.size() >= 2;
  };

  criterion(3, "L2L2 / L2H1 convergence", [&](std::string& d) {
    need_study();
    const auto e0 = column(&TauErrors::e_L2L2), e1 = column(&TauErrors::e_L2H1);
    const double order = fit_loglog(cfg.taus, e0).slope;
    d = fmt("L2L2 %.2e", e0.front()) + fmt(" -> %.2e", e0.back()) + fmt("  L2H1 %.2e", e1.front()) +
        fmt(" -> %.2e", e1.back()) + fmt("  order %.3f", order) + fmt("  %.1f s", study_secs);
    return decreasing(e0) && decreasing(e1) && order >= 0.8 && study_secs < 300;
  });

  criterion(4, "L2H2 and log-L2H2 convergence", [&](std::string& d) {
    need_study();
    const auto e2 = column(&TauErrors::e_L2H2), el = column(&TauErrors::e_logH2);
    d = fmt("L2H2 %.2e", e2.front()) + fmt(" -> %.2e", e2.back()) + fmt("  log %.2e", el.front()) +
        fmt(" -> %.2e", el.back());
    return decreasing(e2) && decreasing(el);
  });

  criterion(5, "five-gradients identity", [](std::string& d) {
    const auto t0 = Clock::now();
    const Grid1D g1024(0, 1, 1024);
    std::mt19937_64 rng(2024);
    double worst_rel = 0, worst_inner = INFINITY, worst_bnd = INFINITY;
    bool ok = true;
    for (int t = 0; t < 20; ++t) {
      const Density r = random_density(g1024, rng), q = random_density(g1024, rng);
      const TransportPlan plan = optimal_plan(r, q);
      for (double p : {2.0, 3.0}) {
        const InequalityReport rep = check_five_gradients(r, q, p, plan);
        worst_rel = std::max(worst_rel, std::abs(rep.margin) / (1 + std::abs(rep.lhs)));
        worst_inner = std::min(worst_inner, rep.details.at("interior_remainder"));
        for (const char* k : {"boundary_rho_a", "boundary_rho_b", "boundary_g_a", "boundary_g_b"})
          worst_bnd = std::min(worst_bnd, rep.details.at(k));
        ok = ok && rep.satisfied;
      }
    }
    const double secs = seconds_since(t0);
    d = fmt("max rel residual %.2e", worst_rel) + fmt("  min interior %.2e", worst_inner) +
        fmt("  min boundary %.2e", worst_bnd) + fmt("  %.1f s", secs);
    return ok && worst_rel <= 1e-3 && worst_inner >= -1e-8 && worst_bnd >= -1e-8 && secs < 60;
  });

  criterion(6, "per-step inequality suite", [](std::string& d) {
    const Grid1D g256(0, 1, 256);
    const Potential W = quadratic_potential(g256, 0.5, 4);
    JKOConfig c;
    c.tau = 1e-3;
    const JKOTrajectory traj = run_trajectory(tilted_cosine(W, 0.3), W, 0.1, c);
    double flow = INFINITY, lp = INFINITY;
    for (const JKOStepResult& s : traj.steps) {
      flow = std::min(flow, check_flow_interchange(s, W).margin);
      lp = std::min(lp, check_lp_decay(s, W, 2).margin);
    }
    double fp = INFINITY;
    for (const InequalityReport& r : check_fp_decay(traj, W, 2)) fp = std::min(fp, r.margin);
    const double band = check_maxmin(traj, W).margin;
    const double tele = check_w2_telescope(traj, W).margin;
    d = "steps " + std::to_string(traj.N()) + fmt("  min margins: flow %.2e", flow) + fmt("  Lp %.2e", lp) +
        fmt("  F2 %.2e", fp) + fmt("  band %.2e", band) + fmt("  W2 %.2e", tele);
    return traj.N() == 100 && std::min({flow, lp, fp, band, tele}) >= -1e-6;
  });

  criterion(7, "regularized curve identity", [&](std::string& d) {
    need_study();
    double worst = 0, spread = 0;
    bool ok = !study.records.empty();
    for (const TauRecord& r : study.records) {
      if (r.eps_checks.size() != 3) ok = false;
      double lo = INFINITY, hi = 0;
      for (const EpsCheck& e : r.eps_checks) {
        worst = std::max(worst, std::abs(e.measured - e.closed_form));
        lo = std::min(lo, e.ratio);
        hi = std::max(hi, e.ratio);
      }
      spread = std::max(spread, hi / lo - 1);
    }
    d = fmt("max |measured - closed form| %.2e", worst) + fmt("  max ratio spread %.2f%%", 100 * spread);
    return ok && worst <= 1e-8 && spread <= 0.05;
  });

  criterion(8, "displacement scaling", [&](std::string& d) {
    need_study();
    const ScalingReport& s = study.scaling;
    const bool hess = decreasing(s.hessian);
    d = fmt("vs W2 %.3f", s.vs_w2.slope) + fmt("  vs tau %.3f", s.vs_tau.slope) + fmt("  beta %.3f", s.beta_hessian) +
        std::string("  hessian ") + (hess ? "decreasing" : "not decreasing");
    return !s.degenerate && s.vs_w2.slope >= 2.0 / 3 - 0.1 && s.vs_tau.slope >= 1.0 / 3 - 0.1 && hess;
  });

  criterion(9, "F2 dissipation matching", [&](std::string& d) {
    need_study();
    const double jko = study.records.back().f2.rhs;
    const double pde = study.pde_f2_dissipation;
    const double rel = std::abs(jko - pde) / std::abs(pde);
    std::vector<double> delta;
    for (const TauRecord& r : study.records) delta.push_back(r.f2.details.at("delta"));
    d = fmt("JKO %.6f", jko) + fmt("  PDE %.6f", pde) + fmt("  rel %.2f%%", 100 * rel) + fmt("  delta %.2e", delta.front()) +
        fmt(" -> %.2e", delta.back());
    return rel <= 0.05 && decreasing(delta);
  });

  criterion(10, "determinism and gradient", [&](std::string& d) {
    need_study();
    const StudyResult again = run_study(cfg);
    bool same = again.records.size() == study.records.size();
    for (size_t i = 0; same && i < study.records.size(); ++i) {
      const TauErrors& a = study.records[i].errors;
      const TauErrors& b = again.records[i].errors;
      same = std::memcmp(&a, &b, sizeof a) == 0;
      const auto& ta = study.records[i].trajectory.densities;
      const auto& tb = again.records[i].trajectory.densities;
      for (size_t k = 0; same && k < ta.size(); ++k) same = same_bits(ta[k].values(), tb[k].values());
    }

    const Grid1D g128(0, 1, 128);
    const Potential W = quadratic_potential(g128, 0.5, 4);
    std::mt19937_64 rng(77);
    double worst = 0;
    for (int t = 0; t < 10; ++t) {
      const StepObjective obj(random_density(g128, rng), W, 1e-3);
      const VecX F = obj.coordinates(random_density(g128, rng));
      const VecX grad = obj.gradient(F);
      VecX fd(F.size());
      const double step = 1e-7;
      for (Index j = 0; j < F.size(); ++j) {
        VecX up = F, dn = F;
        up[j] += step;
        dn[j] -= step;
        fd[j] = (obj.value(up) - obj.value(dn)) / (2 * step);
      }
      worst = std::max(worst, (grad - fd).norm() / grad.norm());
    }
    d = std::string("repeat ") + (same ? "bitwise identical" : "differs") + fmt("  gradient rel error %.2e", worst);
    return same && worst <= 1e-6;
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
