#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "jkofp/scheme.hpp"

namespace jkofp {

/// Outcome of one discrete inequality or identity check.
///
/// For inequalities, satisfied <=> margin >= -tol. For identities the margin
/// is lhs - rhs and satisfied <=> |margin| <= tol plus any side conditions
/// recorded in `details`.
struct InequalityReport {
  std::string name;
  std::string kind = "inequality";  // or "identity"
  double lhs = 0;
  double rhs = 0;
  double margin = 0;
  double tol = 0;
  bool satisfied = false;
  long step = -1;  // -1 when the check spans a whole trajectory
  double tau = 0;
  std::map<std::string, double> details;
};

void to_json(nlohmann::json& j, const InequalityReport& r);

/// Least-squares line through (log x, log y).
struct LogLogFit {
  double slope = 0;
  double log_constant = 0;
  double residual = 0;  // root-mean-square residual in log space
};

void to_json(nlohmann::json& j, const LogLogFit& f);

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingReport {
  std::vector<double> taus;
  std::vector<double> displacement;  // max_k ||id - T_k||_inf
  std::vector<double> w2;            // max_k W2(rho_{k+1}, rho_k)
  std::vector<double> hessian;       // max_k ||phi_k''||_inf
  LogLogFit vs_tau;
  LogLogFit vs_w2;
  LogLogFit hessian_vs_tau;
  double target_vs_tau = 1.0 / 3.0;  // 1 / (d + 2), d = 1
  double target_vs_w2 = 2.0 / 3.0;   // 2 / (d + 2)
  double beta_hessian = 0;
  bool degenerate = false;
  bool satisfied = false;
};

void to_json(nlohmann::json& j, const ScalingReport& r);

/// Five-gradients identity for H(z) = |z|^p / p between `rho` and `g`:
///   int rho' H'(phi') + g' H'(psi') = int rho H''(phi') phi''^2 / (1 - phi'')
///                                     + boundary terms with outward normals.
/// Throws MonotonicityLoss if 1 - phi'' <= 0 in some cell.
InequalityReport check_five_gradients(const Density& rho, const Density& g, double p, const TransportPlan& plan);

/// Flow interchange with f(s) = s^2:
///   int rho_k^2 >= int rho_{k+1}^2 + 2 tau int (|rho'|^2 + rho rho' V')|_{k+1}.
InequalityReport check_flow_interchange(const JKOStepResult& step, const Potential& V);

/// int rho_k^p >= (1 - tau p (p-1) Lip(V)^2 / 4) int rho_{k+1}^p.
InequalityReport check_lp_decay(const JKOStepResult& step, const Potential& V, double p);

/// 2 (J(rho_0) - J(gibbs)) >= sum_k W2(rho_k, rho_{k+1})^2 / tau.
InequalityReport check_w2_telescope(const JKOTrajectory& traj, const Potential& V);

/// Per step: F_p(rho_k) >= (1 + p lambda tau) F_p(rho_{k+1}).
std::vector<InequalityReport> check_fp_decay(const JKOTrajectory& traj, const Potential& V, double p);

/// a <= log rho_k + V <= b for every k, with [a, b] the band of rho_0.
InequalityReport check_maxmin(const JKOTrajectory& traj, const Potential& V);

/// Exponents of the displacement and potential-Hessian decay over a tau family.
ScalingReport fit_displacement_scaling(const std::vector<const JKOTrajectory*>& trajs);

/// F2(rho_0) - F2(rho_N) against sum_k tau [int |(log rho_k + V)''|^2 rho_k
/// + int ((log rho_k + V)')^2 V'' rho_k]. `details["delta"]` is the measured
/// defect |lhs - rhs|, which stands in for the vanishing error term.
InequalityReport check_f2_dissipation_jko(const JKOTrajectory& traj, const Potential& V);

/// True when the F2 defects shrink monotonically as tau decreases.
/// Reports must be ordered by decreasing tau.
InequalityReport check_f2_defect_family(const std::vector<InequalityReport>& reports);

struct SuiteOptions {
  std::vector<double> lp_exponents{2.0};
  std::vector<double> fisher_exponents{2.0};
};

/// Every per-step and per-trajectory check on one trajectory.
std::vector<InequalityReport> run_suite(const JKOTrajectory& traj, const Potential& V, const SuiteOptions& opts = {});

bool all_satisfied(const std::vector<InequalityReport>& reports);

}  // namespace jkofp
