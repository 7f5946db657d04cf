#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "jkofp/errors.hpp"
#include "jkofp/functionals.hpp"

namespace jkofp {

/// Invocation problem tied to one configuration field.
class UsageError : public Error {
 public:
  UsageError(const std::string& field, const std::string& what) : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class UnknownFlag : public UsageError {
 public:
  using UsageError::UsageError;
};

class InvalidValue : public UsageError {
 public:
  using UsageError::UsageError;
};

class MissingRequired : public UsageError {
 public:
  using UsageError::UsageError;
};

struct RunConfig {
  std::string subcommand;  // step | run | study | check
  double a = 0;
  double b = 1;
  Index n = 256;
  Index m = 1024;           // quantile nodes in step output
  std::string V = "zero";   // zero | quadratic:c,s | doublewell:c,w,s | FILE.csv
  std::string rho0 = "uniform";  // uniform | cosine:A,f | gibbs | FILE.csv
  double tau = 1e-3;
  std::vector<double> tau_list;
  double T = 0;
  double newton_tol = 1e-10;
  double floor = kDefaultFloor;
  double dt_ref = 0;  // 0 picks min(tau) / 20
  std::string out = "jkofp-out";
  std::uint64_t seed = 0;
  bool parallel = false;
  std::string json_config;
  std::vector<std::string> from_flags;  // fields set on the command line
  std::vector<std::string> from_file;   // fields set by the config file
};

nlohmann::json effective_config(const RunConfig& cfg);

/// Parses `args` (without the program name). Values from --json-config are
/// applied first, then command-line flags override them. Throws
/// UnknownFlag, InvalidValue or MissingRequired naming the field.
RunConfig parse_config(const std::vector<std::string>& args);

Potential make_potential(const RunConfig& cfg, const Grid1D& grid);

/// uniform, gibbs, e^{-V} (1 + A cos(f pi (x - a) / L)) normalized, or a
/// tabulated profile.
Density make_initial(const RunConfig& cfg, const Grid1D& grid, const Potential& V);

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2, kDiagnostics = 3, kIo = 4 };

/// Runs the selected pipeline and writes its outputs under cfg.out.
int dispatch(const RunConfig& cfg, std::ostream& out);

/// parse_config + dispatch with every failure mapped to an exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jkofp
