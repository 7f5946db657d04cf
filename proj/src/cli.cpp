#include "jkofp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "jkofp/diagnostics.hpp"
#include "jkofp/study.hpp"

namespace jkofp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct HelpRequested {
  std::string text;
};

const std::vector<std::string>& field_names() {
  static const std::vector<std::string> names = {"a",     "b",         "domain", "n",         "m",
                                                 "V",     "rho0",      "tau",    "tau-list",  "T",
                                                 "newton-tol", "floor", "dt-ref", "out",      "seed",
                                                 "parallel"};
  return names;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& field, const std::string& s, const std::string& expected) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidValue(field, "'" + s + "' is not a number; expected " + expected);
  }
  if (used != s.size() || !std::isfinite(v)) throw InvalidValue(field, "'" + s + "' is not a number; expected " + expected);
  return v;
}

long long to_integer(const std::string& field, const std::string& s, const std::string& expected) {
  size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw InvalidValue(field, "'" + s + "' is not an integer; expected " + expected);
  }
  if (used != s.size()) throw InvalidValue(field, "'" + s + "' is not an integer; expected " + expected);
  return v;
}

std::vector<double> to_list(const std::string& field, const std::string& s, const std::string& expected) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(to_double(field, item, expected));
  return out;
}

bool to_bool(const std::string& field, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw InvalidValue(field, "'" + s + "' is not a boolean; expected true or false");
}

std::string json_scalar(const std::string& field, const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string joined;
    for (size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw InvalidValue(field, "array entries must be numbers");
      joined += (i ? "," : "") + v[i].dump();
    }
    return joined;
  }
  throw InvalidValue(field, "unsupported JSON value " + v.dump());
}

bool divides(double T, double dt) {
  const double k = std::round(T / dt);
  return k >= 1 && std::abs(k * dt - T) <= 1e-9 * std::max(1.0, T);
}

// Family name and comma-separated parameters of "name:p1,p2".
std::pair<std::string, std::vector<double>> family(const std::string& field, const std::string& spec,
                                                   const std::string& expected) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return {spec, {}};
  return {spec.substr(0, colon), to_list(field, spec.substr(colon + 1), expected)};
}

bool is_file_spec(const std::string& spec) { return spec.find(':') == std::string::npos && spec.find('.') != std::string::npos; }

const char* kVForms = "zero | quadratic:CENTER,STRENGTH | doublewell:CENTER,WIDTH,STRENGTH | FILE.csv";
const char* kRhoForms = "uniform | cosine:AMPLITUDE,FREQUENCY | gibbs | FILE.csv";

void validate_V(const std::string& spec) {
  if (is_file_spec(spec)) {
    if (!fs::exists(spec)) throw InvalidValue("V", "file '" + spec + "' does not exist");
    return;
  }
  const auto [name, p] = family("V", spec, kVForms);
  if (name == "zero" && p.empty()) return;
  if (name == "quadratic" && p.size() == 2) return;
  if (name == "doublewell" && p.size() == 3) {
    if (!(p[1] > 0)) throw InvalidValue("V", "double-well width must be positive");
    if (!(p[2] >= 0)) throw InvalidValue("V", "double-well strength must be nonnegative");
    return;
  }
  throw InvalidValue("V", "'" + spec + "'; expected " + kVForms);
}

void validate_rho0(const std::string& spec) {
  if (is_file_spec(spec)) {
    if (!fs::exists(spec)) throw InvalidValue("rho0", "file '" + spec + "' does not exist");
    return;
  }
  const auto [name, p] = family("rho0", spec, kRhoForms);
  if ((name == "uniform" || name == "gibbs") && p.empty()) return;
  if (name == "cosine" && p.size() == 2) {
    if (!(std::abs(p[0]) < 1)) throw InvalidValue("rho0", "cosine amplitude must satisfy |A| < 1");
    if (!(p[1] > 0)) throw InvalidValue("rho0", "cosine frequency must be positive");
    return;
  }
  throw InvalidValue("rho0", "'" + spec + "'; expected " + kRhoForms);
}

// Two-column (x, value) table, linearly interpolated and clamped at the ends.
GridFunction read_table(const std::string& field, const std::string& file, const Grid1D& grid) {
  std::ifstream in(file);
  if (!in) throw IoError(field + ": cannot open " + file);
  std::vector<double> xs, ys;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    double x = 0, y = 0;
    try {
      if (cells.size() < 2) throw std::invalid_argument("width");
      x = std::stod(cells[0]);
      y = std::stod(cells[1]);
    } catch (const std::exception&) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw IoError(field + ": malformed line '" + line + "' in " + file);
    }
    first = false;
    if (!xs.empty() && !(x > xs.back())) throw IoError(field + ": x must increase strictly in " + file);
    xs.push_back(x);
    ys.push_back(y);
  }
  if (xs.size() < 2) throw IoError(field + ": need at least two rows in " + file);
  return GridFunction::sample(grid, [&](double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto k = static_cast<size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
    const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return (1 - w) * ys[k - 1] + w * ys[k];
  });
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + file.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::vector<double> to_std(const VecX& v) { return {v.data(), v.data() + v.size()}; }

std::string tally_text(const std::vector<InequalityReport>& reports) {
  struct Tally {
    int total = 0, passed = 0;
    double worst = std::numeric_limits<double>::infinity();
  };
  std::map<std::string, Tally> tally;
  for (const auto& r : reports) {
    Tally& t = tally[r.name];
    ++t.total;
    t.passed += r.satisfied ? 1 : 0;
    t.worst = std::min(t.worst, r.margin);
  }
  std::string text;
  char buf[200];
  for (const auto& [name, t] : tally) {
    std::snprintf(buf, sizeof buf, "%-4s %-20s %d/%d  worst margin %.3e\n", t.passed == t.total ? "PASS" : "FAIL",
                  name.c_str(), t.passed, t.total, t.worst);
    text += buf;
  }
  return text;
}

int run_step(const RunConfig& cfg, const Density& rho0, const Potential& V, std::ostream& out) {
  JKOConfig jc;
  jc.tau = cfg.tau;
  jc.newton_tol = cfg.newton_tol;
  jc.validate(V);
  const JKOStepResult s = jko_step(rho0, V, jc);
  const double margin = s.J_prev - s.J_next - s.w2 * s.w2 / (2 * s.tau);
  const QuantileFn q = quantile(s.rho_next, cfg.m);
  json j = {{"tau", s.tau},
            {"J_prev", s.J_prev},
            {"J_next", s.J_next},
            {"w2", s.w2},
            {"energy_inequality_margin", margin},
            {"optimality_residual", s.optimality_residual},
            {"optimality_offset", s.optimality_offset},
            {"gradient_norm", s.gradient_norm},
            {"newton_iters", s.newton_iters},
            {"displacement_sup", displacement_sup(s.plan)},
            {"x", to_std(rho0.grid().nodes())},
            {"rho_prev", to_std(rho0.values())},
            {"rho_next", to_std(s.rho_next.values())},
            {"map", to_std(s.plan.T.values())},
            {"phi", to_std(s.plan.phi.values())},
            {"quantile", {{"s", to_std(q.s)}, {"X", to_std(q.X)}}}};
  write_text(fs::path(cfg.out) / "step.json", j.dump(2) + "\n");
  json brief = j;
  for (const char* k : {"x", "rho_prev", "rho_next", "map", "phi", "quantile"}) brief.erase(k);
  out << brief.dump(2) << '\n';
  return margin >= -1e-10 ? kOk : kDiagnostics;
}

int run_run(const RunConfig& cfg, const Density& rho0, const Potential& V, std::ostream& out) {
  JKOConfig jc;
  jc.tau = cfg.tau;
  jc.newton_tol = cfg.newton_tol;
  const JKOTrajectory traj = run_trajectory(rho0, V, cfg.T, jc);
  std::string csv = "step,t,J,F2,w2,newton_iters,optimality_residual,gradient_norm\n";
  csv += "0,0," + fmt(entropy_J(rho0, V)) + "," + fmt(fisher_Fp(rho0, V, 2)) + ",0,0,0,0\n";
  bool ok = true;
  for (Index k = 0; k < traj.N(); ++k) {
    const JKOStepResult& s = traj.steps[static_cast<size_t>(k)];
    const double t = static_cast<double>(k + 1) * traj.tau;
    csv += std::to_string(k + 1) + "," + fmt(t) + "," + fmt(s.J_next) + "," + fmt(fisher_Fp(s.rho_next, V, 2)) + "," +
           fmt(s.w2) + "," + std::to_string(s.newton_iters) + "," + fmt(s.optimality_residual) + "," +
           fmt(s.gradient_norm) + "\n";
    if (s.J_prev - s.J_next - s.w2 * s.w2 / (2 * s.tau) < -1e-10) ok = false;
  }
  write_text(fs::path(cfg.out) / "trajectory.csv", csv);
  std::string dens = "x,rho0,rhoT\n";
  const VecX x = rho0.grid().nodes();
  for (Index i = 0; i < x.size(); ++i) {
    dens += fmt(x[i]) + "," + fmt(rho0[i]) + "," + fmt(traj.densities.back()[i]) + "\n";
  }
  write_text(fs::path(cfg.out) / "final_density.csv", dens);
  char buf[200];
  std::snprintf(buf, sizeof buf, "steps %ld  J(0) %.10g  J(T) %.10g  energy inequality %s\n",
                static_cast<long>(traj.N()), entropy_J(rho0, V), traj.steps.empty() ? entropy_J(rho0, V) : traj.steps.back().J_next,
                ok ? "PASS" : "FAIL");
  out << buf;
  return ok ? kOk : kDiagnostics;
}

int run_check(const RunConfig& cfg, const Density& rho0, const Potential& V, std::ostream& out) {
  JKOConfig jc;
  jc.tau = cfg.tau;
  jc.newton_tol = cfg.newton_tol;
  const JKOTrajectory traj = run_trajectory(rho0, V, cfg.T, jc);
  const std::vector<InequalityReport> reports = run_suite(traj, V);
  json bundle = json::array();
  for (const auto& r : reports) bundle.push_back(r);
  write_text(fs::path(cfg.out) / "diagnostics.json", bundle.dump(2) + "\n");
  const bool ok = all_satisfied(reports);
  const std::string text = tally_text(reports) + "overall: " + (ok ? "PASS" : "FAIL") + "\n";
  write_text(fs::path(cfg.out) / "summary.txt", text);
  out << text;
  return ok ? kOk : kDiagnostics;
}

int run_study_cmd(const RunConfig& cfg, const Density& rho0, const Potential& V, std::ostream& out) {
  StudyConfig sc(rho0, V);
  sc.T = cfg.T;
  sc.taus = cfg.tau_list;
  sc.dt_ref = cfg.dt_ref;
  sc.jko.newton_tol = cfg.newton_tol;
  sc.parallel = cfg.parallel;
  const StudyResult res = run_study(sc);
  emit_report(res, cfg.out);
  std::ifstream summary(fs::path(cfg.out) / "summary.txt");
  out << summary.rdbuf();
  return res.all_ok ? kOk : kDiagnostics;
}

}  // namespace

json effective_config(const RunConfig& cfg) {
  return json{{"subcommand", cfg.subcommand},
              {"domain", {cfg.a, cfg.b}},
              {"n", cfg.n},
              {"m", cfg.m},
              {"V", cfg.V},
              {"rho0", cfg.rho0},
              {"tau", cfg.tau},
              {"tau-list", cfg.tau_list},
              {"T", cfg.T},
              {"newton-tol", cfg.newton_tol},
              {"floor", cfg.floor},
              {"dt-ref", cfg.dt_ref},
              {"out", cfg.out},
              {"seed", cfg.seed},
              {"parallel", cfg.parallel},
              {"json-config", cfg.json_config},
              {"set_by_flags", cfg.from_flags},
              {"set_by_file", cfg.from_file}};
}

RunConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"JKO minimizing-movement laboratory for the 1-D Fokker-Planck equation", "jkofp"};
  app.require_subcommand(1, 1);
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> opts;
  for (const auto& name : field_names()) {
    if (name == "parallel") continue;
    opts[name] = app.add_option("--" + name, flag_values[name]);
  }
  opts["json-config"] = app.add_option("--json-config", flag_values["json-config"], "JSON file with default values");
  bool parallel_flag = false;
  opts["parallel"] = app.add_flag("--parallel", parallel_flag, "run tau values concurrently in study");
  opts["a"]->description("left endpoint");
  opts["b"]->description("right endpoint");
  opts["domain"]->description("A,B");
  opts["n"]->description("cell count");
  opts["m"]->description("quantile nodes in step output");
  opts["V"]->description(kVForms);
  opts["rho0"]->description(kRhoForms);
  opts["tau"]->description("JKO step for step, run, check");
  opts["tau-list"]->description("decreasing JKO steps for study");
  opts["T"]->description("horizon");
  opts["newton-tol"]->description("Newton gradient tolerance");
  opts["floor"]->description("density floor");
  opts["dt-ref"]->description("reference Fokker-Planck step for study");
  opts["out"]->description("output directory");
  opts["seed"]->description("seed for randomized corpora");
  app.add_subcommand("step", "one JKO step from rho0 with --tau; writes step.json")->fallthrough();
  app.add_subcommand("run", "JKO trajectory up to --T; writes trajectory.csv and final_density.csv")->fallthrough();
  app.add_subcommand("study", "tau-refinement study against a Fokker-Planck reference; writes errors.csv, "
                              "diagnostics.json, summary.txt")->fallthrough();
  app.add_subcommand("check", "JKO trajectory up to --T with every inequality check; writes diagnostics.json")
      ->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ExtrasError& e) {
    const auto extras = app.remaining();
    throw UnknownFlag(extras.empty() ? "argument" : extras.front(), e.what());
  } catch (const CLI::RequiredError&) {
    throw MissingRequired("subcommand", "expected one of step, run, study, check");
  } catch (const CLI::ParseError& e) {
    throw InvalidValue("argument", e.what());
  }

  RunConfig cfg;
  cfg.subcommand = app.get_subcommands().front()->get_name();

  std::map<std::string, std::string> raw;
  if (opts["json-config"]->count()) {
    cfg.json_config = flag_values["json-config"];
    std::ifstream in(cfg.json_config);
    if (!in) throw InvalidValue("json-config", "cannot open '" + cfg.json_config + "'");
    json file;
    try {
      in >> file;
    } catch (const json::exception& e) {
      throw InvalidValue("json-config", std::string("malformed JSON: ") + e.what());
    }
    if (!file.is_object()) throw InvalidValue("json-config", "expected a JSON object");
    const auto& names = field_names();
    for (const auto& [key, value] : file.items()) {
      if (std::find(names.begin(), names.end(), key) == names.end()) {
        throw UnknownFlag(key, "unknown key in " + cfg.json_config);
      }
      raw[key] = json_scalar(key, value);
      cfg.from_file.push_back(key);
    }
  }
  for (const auto& name : field_names()) {
    if (opts[name]->count()) {
      raw[name] = name == "parallel" ? std::string(parallel_flag ? "true" : "false") : flag_values[name];
      cfg.from_flags.push_back(name);
    }
  }

  auto has = [&](const char* k) { return raw.count(k) > 0; };
  if (has("domain")) {
    const auto ab = to_list("domain", raw["domain"], "A,B");
    if (ab.size() != 2) throw InvalidValue("domain", "expected A,B");
    cfg.a = ab[0];
    cfg.b = ab[1];
  }
  if (has("a")) cfg.a = to_double("a", raw["a"], "a real number");
  if (has("b")) cfg.b = to_double("b", raw["b"], "a real number");
  if (!(cfg.b > cfg.a)) throw InvalidValue("domain", "b must exceed a");
  if (has("n")) cfg.n = static_cast<Index>(to_integer("n", raw["n"], "an integer >= 8"));
  if (cfg.n < 8) throw InvalidValue("n", "expected an integer >= 8");
  if (has("m")) cfg.m = static_cast<Index>(to_integer("m", raw["m"], "a positive integer"));
  if (cfg.m < 1) throw InvalidValue("m", "expected a positive integer");
  if (has("V")) cfg.V = raw["V"];
  validate_V(cfg.V);
  if (has("rho0")) cfg.rho0 = raw["rho0"];
  validate_rho0(cfg.rho0);
  if (has("tau")) cfg.tau = to_double("tau", raw["tau"], "a positive real");
  if (!(cfg.tau > 0)) throw InvalidValue("tau", "expected a positive real");
  if (has("tau-list")) cfg.tau_list = to_list("tau-list", raw["tau-list"], "comma-separated positive reals");
  if (has("T")) cfg.T = to_double("T", raw["T"], "a positive real");
  if (has("newton-tol")) cfg.newton_tol = to_double("newton-tol", raw["newton-tol"], "a positive real");
  if (!(cfg.newton_tol > 0)) throw InvalidValue("newton-tol", "expected a positive real");
  if (has("floor")) cfg.floor = to_double("floor", raw["floor"], "a positive real");
  if (!(cfg.floor > 0) || !(cfg.floor * (cfg.b - cfg.a) < 1)) {
    throw InvalidValue("floor", "expected 0 < floor < 1 / (b - a)");
  }
  if (has("dt-ref")) cfg.dt_ref = to_double("dt-ref", raw["dt-ref"], "a nonnegative real");
  if (!(cfg.dt_ref >= 0)) throw InvalidValue("dt-ref", "expected a nonnegative real");
  if (has("out")) cfg.out = raw["out"];
  if (cfg.out.empty()) throw InvalidValue("out", "expected a directory path");
  if (has("seed")) {
    const long long s = to_integer("seed", raw["seed"], "a nonnegative integer");
    if (s < 0) throw InvalidValue("seed", "expected a nonnegative integer");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (has("parallel")) cfg.parallel = to_bool("parallel", raw["parallel"]);

  if (cfg.subcommand != "step") {
    if (!has("T")) throw MissingRequired("T", "required by " + cfg.subcommand + "; expected a positive real");
    if (!(cfg.T > 0)) throw InvalidValue("T", "expected a positive real");
  }
  if (cfg.subcommand == "run" || cfg.subcommand == "check") {
    if (!divides(cfg.T, cfg.tau)) throw InvalidValue("tau", "tau does not divide T");
  }
  if (cfg.subcommand == "study") {
    if (!has("tau-list")) throw MissingRequired("tau-list", "required by study; expected comma-separated reals");
    for (size_t i = 0; i < cfg.tau_list.size(); ++i) {
      const double t = cfg.tau_list[i];
      if (!(t > 0)) throw InvalidValue("tau-list", "entries must be positive");
      if (!divides(cfg.T, t)) throw InvalidValue("tau-list", "tau " + short_num(t) + " does not divide T = " + short_num(cfg.T));
      if (i > 0 && !(t < cfg.tau_list[i - 1])) throw InvalidValue("tau-list", "entries must decrease strictly");
    }
  }
  return cfg;
}

Potential make_potential(const RunConfig& cfg, const Grid1D& grid) {
  if (is_file_spec(cfg.V)) return Potential::from_samples(read_table("V", cfg.V, grid));
  const auto [name, p] = family("V", cfg.V, kVForms);
  if (name == "quadratic") return quadratic_potential(grid, p[0], p[1]);
  if (name == "doublewell") return double_well_potential(grid, p[0], p[1], p[2]);
  return zero_potential(grid);
}

Density make_initial(const RunConfig& cfg, const Grid1D& grid, const Potential& V) {
  if (is_file_spec(cfg.rho0)) return Density::from_profile(read_table("rho0", cfg.rho0, grid), cfg.floor);
  const auto [name, p] = family("rho0", cfg.rho0, kRhoForms);
  if (name == "gibbs") return gibbs_density(V, cfg.floor);
  if (name == "cosine") {
    const double A = p[0], f = p[1];
    const VecX base = (-V.values().array()).exp();
    const GridFunction bump = GridFunction::sample(
        grid, [&](double x) { return 1 + A * std::cos(f * M_PI * (x - grid.a()) / grid.length()); });
    return Density::from_profile(bump.with_values(base.cwiseProduct(bump.values())), cfg.floor);
  }
  return Density::uniform(grid, cfg.floor);
}

int dispatch(const RunConfig& cfg, std::ostream& out) {
  const Grid1D grid(cfg.a, cfg.b, cfg.n);
  const Potential V = make_potential(cfg, grid);
  const Density rho0 = make_initial(cfg, grid, V);
  ensure_dir(cfg.out);
  write_text(fs::path(cfg.out) / "effective-config.json", effective_config(cfg).dump(2) + "\n");
  if (cfg.subcommand == "step") return run_step(cfg, rho0, V, out);
  if (cfg.subcommand == "run") return run_run(cfg, rho0, V, out);
  if (cfg.subcommand == "check") return run_check(cfg, rho0, V, out);
  return run_study_cmd(cfg, rho0, V, out);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(parse_config(args), out);
  } catch (const HelpRequested& h) {
    out << h.text;
    return kOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const OracleTooCoarse& e) {
    err << "OracleTooCoarse: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
}

}  // namespace jkofp
