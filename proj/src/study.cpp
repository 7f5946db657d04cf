#include "jkofp/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "jkofp/errors.hpp"

namespace jkofp {

namespace {

bool divides(double T, double dt) {
  const double k = std::round(T / dt);
  return k >= 1 && std::abs(k * dt - T) <= 1e-9 * std::max(1.0, T);
}

double hs_sq(const Grid1D& g, const VecX& d, int s) {
  const double n = sobolev_norm(GridFunction(g, d), s);
  return n * n;
}

// Squared space-time norms accumulated with weight w for one time sample.
void accumulate(TauErrors& acc, const Grid1D& g, const VecX& approx, const VecX& ref, double w) {
  const VecX d = approx - ref;
  acc.e_L2L2 += w * hs_sq(g, d, 0);
  acc.e_L2H1 += w * hs_sq(g, d, 1);
  acc.e_L2H2 += w * hs_sq(g, d, 2);
  acc.e_logH2 += w * hs_sq(g, VecX(approx.array().log() - ref.array().log()), 2);
}

void finish(TauErrors& e) {
  e.e_L2L2 = std::sqrt(e.e_L2L2);
  e.e_L2H1 = std::sqrt(e.e_L2H1);
  e.e_L2H2 = std::sqrt(e.e_L2H2);
  e.e_logH2 = std::sqrt(e.e_logH2);
}

TauErrors trajectory_errors(const JKOTrajectory& traj, const FPSolution& ref) {
  TauErrors e;
  e.tau = traj.tau;
  const Grid1D& g = traj.densities.front().grid();
  for (Index k = 0; k < traj.N(); ++k) {
    const double t_mid = (static_cast<double>(k) + 0.5) * traj.tau;
    accumulate(e, g, traj.densities[static_cast<size_t>(k) + 1].values(), ref.at(t_mid), traj.tau);
  }
  finish(e);
  return e;
}

TauErrors reference_gap(const FPSolution& coarse, const FPSolution& fine) {
  TauErrors e;
  const Grid1D& g = coarse.grid;
  for (size_t j = 1; j < coarse.times.size(); ++j) {
    accumulate(e, g, coarse.densities[j].values(), fine.at(coarse.times[j]), coarse.times[j] - coarse.times[j - 1]);
  }
  finish(e);
  return e;
}

constexpr const char* kErrorColumns[] = {"e_L2L2", "e_L2H1", "e_L2H2", "e_logH2"};

double column(const TauErrors& e, int c) {
  switch (c) {
    case 0: return e.e_L2L2;
    case 1: return e.e_L2H1;
    case 2: return e.e_L2H2;
    default: return e.e_logH2;
  }
}

TauRecord run_one(const StudyConfig& cfg, double tau, const FPSolution& ref) {
  JKOConfig jc = cfg.jko;
  jc.tau = tau;
  TauRecord rec;
  rec.trajectory = run_trajectory(cfg.rho0, cfg.V, cfg.T, jc);
  rec.errors = trajectory_errors(rec.trajectory, ref);
  if (rec.trajectory.N() >= 2) {
    for (double eps : cfg.eps_list) {
      const InterpolatedCurve curve = interpolate_eps(rec.trajectory, eps);
      EpsCheck c;
      c.eps = eps;
      c.measured = curve.l2l2_distance();
      c.closed_form = curve.l2l2_distance_closed_form();
      c.ratio = c.measured / std::sqrt(eps);
      rec.eps_checks.push_back(c);
    }
  }
  rec.f2 = check_f2_dissipation_jko(rec.trajectory, cfg.V);
  if (cfg.diagnostics) {
    rec.reports = run_suite(rec.trajectory, cfg.V);
    for (const auto& r : rec.reports) {
      auto [it, fresh] = rec.min_margin.emplace(r.name, r.margin);
      if (!fresh) it->second = std::min(it->second, r.margin);
    }
  }
  return rec;
}

InequalityReport decrease_check(const std::string& name, const std::vector<double>& errs, const std::vector<double>& taus) {
  InequalityReport r;
  r.name = name;
  r.satisfied = true;
  double worst = std::numeric_limits<double>::infinity();
  for (size_t i = 1; i < errs.size(); ++i) {
    worst = std::min(worst, errs[i - 1] - errs[i]);
    if (!(errs[i] < errs[i - 1])) r.satisfied = false;
  }
  if (errs.size() >= 2) {
    r.lhs = errs.front();
    r.rhs = errs.back();
    r.margin = worst;
    r.tau = taus.back();
  }
  // Errors at roundoff level have nothing left to resolve.
  if (std::all_of(errs.begin(), errs.end(), [](double e) { return e < 1e-10; })) r.satisfied = true;
  return r;
}

InequalityReport floor_check(const std::string& name, double value, double floor, double tau = 0) {
  InequalityReport r;
  r.name = name;
  r.lhs = value;
  r.rhs = floor;
  r.margin = value - floor;
  r.satisfied = std::isfinite(value) && r.margin >= 0;
  r.tau = tau;
  return r;
}

}  // namespace

StudyResult run_study(const StudyConfig& cfg) {
  if (!(cfg.T > 0)) throw InvalidArgument("study: T must be positive");
  for (size_t i = 0; i < cfg.taus.size(); ++i) {
    if (!(cfg.taus[i] > 0) || !divides(cfg.T, cfg.taus[i])) {
      throw InvalidArgument("study: tau " + std::to_string(cfg.taus[i]) + " does not divide T");
    }
    if (i > 0 && !(cfg.taus[i] < cfg.taus[i - 1])) throw InvalidArgument("study: taus must be strictly decreasing");
  }
  StudyResult res;
  if (cfg.taus.empty()) return res;

  const double tau_min = cfg.taus.back();
  res.dt_ref = cfg.dt_ref > 0 ? cfg.dt_ref : tau_min / 20;
  if (res.dt_ref > tau_min / 10 * (1 + 1e-12)) {
    throw OracleTooCoarse("study: dt_ref = " + std::to_string(res.dt_ref) + " exceeds min(tau) / 10 = " +
                          std::to_string(tau_min / 10));
  }
  if (!divides(cfg.T, res.dt_ref)) throw InvalidArgument("study: dt_ref does not divide T");

  const FPSolution ref = fp_solve(cfg.rho0, cfg.V, cfg.T, res.dt_ref);
  const FPSolution ref_fine = fp_solve(cfg.rho0, cfg.V, cfg.T, res.dt_ref / 2);
  res.reference_consistency = reference_gap(ref, ref_fine);
  res.pde_f2_dissipation = dissipation_F2(ref, cfg.V).dissipation;

  if (cfg.parallel) {
    std::vector<std::future<TauRecord>> jobs;
    for (double tau : cfg.taus) jobs.push_back(std::async(std::launch::async, run_one, std::cref(cfg), tau, std::cref(ref)));
    for (auto& j : jobs) res.records.push_back(j.get());
  } else {
    for (double tau : cfg.taus) res.records.push_back(run_one(cfg, tau, ref));
  }

  // Oracle dominance, per norm, whenever there is an error to resolve.
  for (int c = 0; c < 4; ++c) {
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& r : res.records) smallest = std::min(smallest, column(r.errors, c));
    const double gap = column(res.reference_consistency, c);
    if (smallest > 1e-9 && gap >= 0.1 * smallest) {
      std::ostringstream msg;
      msg << "study: reference gap " << gap << " in " << kErrorColumns[c] << " is not below 10% of the smallest JKO error "
          << smallest << "; decrease dt_ref";
      throw OracleTooCoarse(msg.str());
    }
  }

  std::vector<double> taus;
  for (const auto& r : res.records) taus.push_back(r.errors.tau);
  for (int c = 0; c < 4; ++c) {
    std::vector<double> errs;
    for (const auto& r : res.records) errs.push_back(column(r.errors, c));
    res.checks.push_back(decrease_check(std::string("decrease_") + kErrorColumns[c], errs, taus));
    const bool fittable = errs.size() >= 2 && std::all_of(errs.begin(), errs.end(), [](double e) { return e > 1e-14; });
    if (fittable) res.orders[kErrorColumns[c]] = fit_loglog(taus, errs);
  }
  if (res.orders.count("e_L2L2")) {
    res.checks.push_back(floor_check("order_e_L2L2", res.orders["e_L2L2"].slope, 0.8));
  }

  for (const auto& r : res.records) {
    if (r.errors.e_L2H2 > 1e-12) {
      InequalityReport q = floor_check("log_composition_ratio", 10.0, r.errors.e_logH2 / r.errors.e_L2H2, r.errors.tau);
      res.checks.push_back(q);
    }
    if (!r.eps_checks.empty()) {
      double worst = 0, lo = r.eps_checks.front().ratio, hi = lo, largest = 0;
      for (const auto& e : r.eps_checks) {
        worst = std::max(worst, std::abs(e.measured - e.closed_form));
        largest = std::max(largest, e.measured);
        lo = std::min(lo, e.ratio);
        hi = std::max(hi, e.ratio);
      }
      InequalityReport id = floor_check("eps_curve_closed_form", 1e-8, worst, r.errors.tau);
      res.checks.push_back(id);
      // Distances at roundoff level (equilibrium start) carry no ratio.
      const double spread = largest > 1e-12 ? hi / lo - 1 : 0;
      InequalityReport st = floor_check("eps_curve_sqrt_ratio", 0.05, spread, r.errors.tau);
      st.details = {{"min_ratio", lo}, {"max_ratio", hi}};
      res.checks.push_back(st);
    }
    if (!cfg.diagnostics) res.checks.push_back(r.f2);
    if (cfg.diagnostics && !all_satisfied(r.reports)) res.diagnostics_ok = false;
  }

  if (res.records.size() >= 2) {
    std::vector<InequalityReport> f2s;
    for (const auto& r : res.records) f2s.push_back(r.f2);
    res.checks.push_back(check_f2_defect_family(f2s));

    const TauRecord& finest = res.records.back();
    const double rhs = finest.f2.rhs;
    const double rel = std::abs(rhs - res.pde_f2_dissipation) / std::max(std::abs(res.pde_f2_dissipation), 1e-300);
    InequalityReport m = floor_check("f2_matches_pde", 0.05, rel, finest.errors.tau);
    m.kind = "identity";
    m.details = {{"jko_dissipation", rhs}, {"pde_dissipation", res.pde_f2_dissipation}};
    if (res.pde_f2_dissipation < 1e-12 && std::abs(rhs) < 1e-12) m.satisfied = true;
    res.checks.push_back(m);
  }

  if (res.records.size() >= 4) {
    std::vector<const JKOTrajectory*> trajs;
    for (const auto& r : res.records) trajs.push_back(&r.trajectory);
    res.scaling = fit_displacement_scaling(trajs);
    res.scaling_fitted = true;
    if (!res.scaling.degenerate) {
      res.checks.push_back(floor_check("displacement_exponent_vs_tau", res.scaling.vs_tau.slope,
                                       res.scaling.target_vs_tau - 0.1));
      res.checks.push_back(floor_check("displacement_exponent_vs_w2", res.scaling.vs_w2.slope,
                                       res.scaling.target_vs_w2 - 0.1));
      res.checks.push_back(floor_check("hessian_exponent", res.scaling.beta_hessian, 0.0));
      res.checks.back().satisfied = res.scaling.beta_hessian > 0;
      res.checks.push_back(decrease_check("decrease_hessian", res.scaling.hessian, res.scaling.taus));
    }
  }

  res.all_ok = res.diagnostics_ok && all_satisfied(res.checks);
  return res;
}

ErrorTable error_table(const StudyResult& result) {
  ErrorTable t;
  t.columns = {"tau"};
  for (const char* c : kErrorColumns) t.columns.emplace_back(c);
  std::set<std::string> names;
  for (const auto& r : result.records)
    for (const auto& [name, v] : r.min_margin) names.insert(name);
  for (const auto& name : names) t.columns.push_back("margin_" + name);
  t.empty_marker = result.records.empty();
  for (const auto& r : result.records) {
    std::vector<double> row{r.errors.tau};
    for (int c = 0; c < 4; ++c) row.push_back(column(r.errors, c));
    for (const auto& name : names) {
      const auto it = r.min_margin.find(name);
      row.push_back(it == r.min_margin.end() ? std::nan("") : it->second);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_error_csv(const ErrorTable& table, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  for (size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  if (table.empty_marker) out << "EMPTY\n";
  char buf[64];
  for (const auto& row : table.rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + file.string());
}

ErrorTable read_error_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  ErrorTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(file.string() + ": missing header");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "EMPTY") {
      t.empty_marker = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(file.string() + ": malformed value '" + cell + "'");
      }
    }
    if (row.size() != t.columns.size()) throw IoError(file.string() + ": row width does not match header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void emit_report(const StudyResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_error_csv(error_table(result), dir / "errors.csv");

  nlohmann::json bundle = nlohmann::json::array();
  for (const auto& r : result.records)
    for (const auto& rep : r.reports) bundle.push_back(rep);
  for (const auto& c : result.checks) bundle.push_back(c);
  {
    std::ofstream out(dir / "diagnostics.json");
    if (!out) throw IoError("cannot open " + (dir / "diagnostics.json").string());
    out << bundle.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + (dir / "diagnostics.json").string());
  }

  std::ofstream out(dir / "summary.txt");
  if (!out) throw IoError("cannot open " + (dir / "summary.txt").string());
  char buf[256];
  if (result.records.empty()) {
    out << "EMPTY study: no tau values\n";
    return;
  }
  std::snprintf(buf, sizeof buf, "reference dt = %.6g, dt vs dt/2 gap: L2L2 %.3e  L2H1 %.3e  L2H2 %.3e  logH2 %.3e\n",
                result.dt_ref, result.reference_consistency.e_L2L2, result.reference_consistency.e_L2H1,
                result.reference_consistency.e_L2H2, result.reference_consistency.e_logH2);
  out << buf << '\n';
  out << "tau           e_L2L2        e_L2H1        e_L2H2        e_logH2\n";
  for (const auto& r : result.records) {
    std::snprintf(buf, sizeof buf, "%-13.6g %-13.6e %-13.6e %-13.6e %-13.6e\n", r.errors.tau, r.errors.e_L2L2,
                  r.errors.e_L2H1, r.errors.e_L2H2, r.errors.e_logH2);
    out << buf;
  }
  out << "\nfitted orders (slope of log error vs log tau, rms fit residual)\n";
  for (const auto& [name, fit] : result.orders) {
    std::snprintf(buf, sizeof buf, "  %-8s %8.4f  residual %.3e\n", name.c_str(), fit.slope, fit.residual);
    out << buf;
  }
  if (result.scaling_fitted) {
    const ScalingReport& s = result.scaling;
    if (s.degenerate) {
      out << "\ndisplacement scaling: degenerate (no motion)\n";
    } else {
      std::snprintf(buf, sizeof buf,
                    "\ndisplacement scaling: vs tau %.4f (floor %.4f), vs W2 %.4f (floor %.4f), hessian beta %.4f\n",
                    s.vs_tau.slope, s.target_vs_tau - 0.1, s.vs_w2.slope, s.target_vs_w2 - 0.1, s.beta_hessian);
      out << buf;
    }
  }
  std::snprintf(buf, sizeof buf, "\nPDE F2 dissipation %.8g\n", result.pde_f2_dissipation);
  out << buf;

  // Pass/fail per inequality, aggregated by name.
  struct Tally {
    int total = 0, passed = 0;
    double worst = std::numeric_limits<double>::infinity();
  };
  std::map<std::string, Tally> tally;
  auto add = [&](const InequalityReport& r) {
    Tally& t = tally[r.name];
    ++t.total;
    t.passed += r.satisfied ? 1 : 0;
    t.worst = std::min(t.worst, r.margin);
  };
  for (const auto& r : result.records)
    for (const auto& rep : r.reports) add(rep);
  for (const auto& c : result.checks) add(c);
  out << "\nchecks\n";
  for (const auto& [name, t] : tally) {
    std::snprintf(buf, sizeof buf, "  %-4s %-32s %d/%d  worst margin %.3e\n", t.passed == t.total ? "PASS" : "FAIL",
                  name.c_str(), t.passed, t.total, t.worst);
    out << buf;
  }
  out << "\noverall: " << (result.all_ok ? "PASS" : "FAIL") << '\n';
  if (!out) throw IoError("write failed for " + (dir / "summary.txt").string());
}

}  // namespace jkofp
