#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jkofp/diagnostics.hpp"
#include "jkofp/fokker_planck.hpp"

namespace jkofp {

struct StudyConfig {
  StudyConfig(Density r, Potential v) : rho0(std::move(r)), V(std::move(v)) {}

  Density rho0;
  Potential V;
  double T = 0.05;
  std::vector<double> taus;  // decreasing, each dividing T
  double dt_ref = 0;         // <= min(taus) / 10; 0 picks min(taus) / 20
  JKOConfig jko;             // tau is overwritten per run
  std::vector<double> eps_list{0.5, 0.25, 0.125};
  bool diagnostics = true;
  bool parallel = false;
};

/// Space-time errors ||rho^tau - rho_ref||_{L2(0,T; H^s)} and the same for logs.
struct TauErrors {
  double tau = 0;
  double e_L2L2 = 0;
  double e_L2H1 = 0;
  double e_L2H2 = 0;
  double e_logH2 = 0;
};

struct EpsCheck {
  double eps = 0;
  double measured = 0;
  double closed_form = 0;
  double ratio = 0;  // measured / sqrt(eps)
};

struct TauRecord {
  TauErrors errors;
  std::vector<EpsCheck> eps_checks;
  std::vector<InequalityReport> reports;  // diagnostics suite for this tau
  std::map<std::string, double> min_margin;
  InequalityReport f2;
  JKOTrajectory trajectory;
};

struct StudyResult {
  std::vector<TauRecord> records;
  double dt_ref = 0;
  TauErrors reference_consistency;  // dt_ref against dt_ref / 2, tau field unused
  double pde_f2_dissipation = 0;
  std::map<std::string, LogLogFit> orders;  // keyed by error column name
  ScalingReport scaling;
  bool scaling_fitted = false;
  std::vector<InequalityReport> checks;  // study-level assertions
  bool diagnostics_ok = true;
  bool all_ok = true;
};

/// Builds one JKO trajectory per tau, compares each with a single implicit
/// Fokker-Planck reference using midpoint sampling in time, and runs every
/// diagnostic. Throws OracleTooCoarse when the reference is not at least ten
/// times more accurate than the best JKO run.
StudyResult run_study(const StudyConfig& cfg);

/// Writes errors.csv, diagnostics.json and summary.txt into `dir`.
void emit_report(const StudyResult& result, const std::filesystem::path& dir);

/// Error table as stored in errors.csv.
struct ErrorTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  bool empty_marker = false;
};

ErrorTable error_table(const StudyResult& result);
ErrorTable read_error_csv(const std::filesystem::path& file);
void write_error_csv(const ErrorTable& table, const std::filesystem::path& file);

}  // namespace jkofp
