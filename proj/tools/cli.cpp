#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "formation/errors.hpp"
#include "formation/estimator.hpp"
#include "formation/fisher.hpp"
#include "formation/formation_opt.hpp"
#include "formation/presets.hpp"
#include "formation/ranging.hpp"
#include "formation/version.hpp"

namespace formation::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kJacobianTolerance = 1e-5;

struct Common {
  std::string scenario;
  fs::path out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

/// Collects what a command wrote and records it in manifest.json.
class Manifest {
 public:
  Manifest(std::string command, const Common& common)
      : command_(std::move(command)), common_(common), start_(std::chrono::steady_clock::now()) {}

  json parameters = json::object();
  json results = json::object();
  std::uint64_t seed = 0;
  std::string message;

  void write_file(const std::string& name, const std::string& text) {
    fs::create_directories(common_.out);
    const fs::path path = common_.out / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw Error("failed writing " + path.string());
    outputs_.push_back(name);
  }

  void finish(int code) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json doc;
    doc["command"] = command_;
    doc["scenario"] = common_.scenario;
    doc["parameters"] = parameters;
    doc["seed"] = seed;
    doc["version"] = kVersion;
    doc["outputs"] = outputs_;
    doc["duration_s"] = seconds;
    doc["status"] = code == kOk ? "ok" : "failed";
    doc["exit_code"] = code;
    if (!message.empty()) doc["message"] = message;
    doc["results"] = results;
    fs::create_directories(common_.out);
    std::ofstream f(common_.out / "manifest.json", std::ios::binary);
    f << doc.dump(2) << "\n";
  }

 private:
  std::string command_;
  Common common_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> outputs_;
};

std::string brief(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

json cost_json(const Cost& c) { return c.is_finite() ? json(c.value()) : json("inf"); }

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json optimizer_json(const OptimizerParams& o) {
  return {{"gamma", o.gamma},       {"activation_radius", o.activation_radius},
          {"safety_radius", o.safety_radius}, {"max_iters", o.max_iters},
          {"grad_tol", o.grad_tol}, {"fd_step", o.fd_step}};
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void require_match(const Scenario& s, const StateTuple& x, const std::string& field) {
  if (x.mode() != s.mode || x.agent_count() != s.agent_count) {
    throw ValidationError(field, "state has mode " + to_string(x.mode()) + " with " +
                                     std::to_string(x.agent_count()) + " agents, scenario has " +
                                     to_string(s.mode) + " with " + std::to_string(s.agent_count));
  }
}

StateTuple state_or_initial(const Scenario& s, const std::string& path) {
  if (path.empty()) return s.initial_state;
  StateTuple x = load_state(path);
  require_match(s, x, "state");
  return x;
}

CsvWriter ellipse_csv(const std::vector<CrlbEllipse>& ellipses, GroupMode mode) {
  std::vector<std::string> header{"agent_id", "point_x", "point_y"};
  if (space_dim(mode) == 3) header.push_back("point_z");
  CsvWriter csv(header);
  for (const CrlbEllipse& e : ellipses) {
    for (const Vector& p : e.contour) {
      std::vector<std::string> row{std::to_string(e.agent_id)};
      for (Eigen::Index i = 0; i < p.size(); ++i) row.push_back(format_double(p(i)));
      csv.add_row(row);
    }
  }
  return csv;
}

json ellipse_summary(const std::vector<CrlbEllipse>& ellipses) {
  json arr = json::array();
  for (const CrlbEllipse& e : ellipses) {
    arr.push_back({{"agent", e.agent_id}, {"center", vector_json(e.center)},
                   {"area", e.area()}, {"eccentricity", e.eccentricity()}});
  }
  return arr;
}

std::vector<Checkpoint> load_trajectory(const fs::path& path, const Scenario& s) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("trace", e.what());
  }
  if (!doc.is_object() || !doc.contains("checkpoints") || !doc["checkpoints"].is_array()) {
    throw ValidationError("trace.checkpoints", "expected a list of checkpoints");
  }
  std::vector<Checkpoint> out;
  for (const json& cp : doc["checkpoints"]) {
    if (!cp.is_object() || !cp.contains("iter") || !cp.contains("state")) {
      throw ValidationError("trace.checkpoints", "each checkpoint needs 'iter' and 'state'");
    }
    StateTuple x = parse_state(cp["state"].dump());
    require_match(s, x, "trace.checkpoints");
    out.push_back({cp["iter"].get<int>(), std::move(x)});
  }
  if (out.empty()) throw ValidationError("trace.checkpoints", "need at least one checkpoint");
  return out;
}

std::vector<Checkpoint> pick_checkpoints(const DescentTrace& trace, int count) {
  std::vector<Checkpoint> cps;
  for (std::size_t i : checkpoint_indices(trace.size(), count)) cps.push_back({trace[i].iter, trace[i].state});
  return cps;
}

// ---- commands ----

struct OptimizeArgs {
  int checkpoints = 10;
};

int cmd_optimize(const Scenario& s, const OptimizeArgs& a, Manifest& m, std::ostream& out) {
  m.parameters = optimizer_json(s.optimizer);
  m.parameters["checkpoints"] = a.checkpoints;
  std::optional<DescentResult> result;
  try {
    result = descend(s);
  } catch (const StallError& e) {
    m.write_file("trace.csv", trace_csv(e.trace()).str());
    throw;
  }
  const DescentTrace& trace = result->trace;
  m.write_file("trace.csv", trace_csv(trace).str());
  m.write_file("formation.json", write_state(result->final_state));

  const MeasurementModel model(s);
  json trajectory;
  trajectory["mode"] = to_string(s.mode);
  trajectory["checkpoints"] = json::array();
  for (const Checkpoint& cp : pick_checkpoints(trace, a.checkpoints)) {
    trajectory["checkpoints"].push_back({{"iter", cp.id}, {"state", json::parse(write_state(cp.state))}});
    m.write_file("crlb_" + std::to_string(cp.id) + ".csv", ellipse_csv(crlb(cp.state, model), s.mode).str());
  }
  m.write_file("trajectory.json", trajectory.dump(2) + "\n");

  const DescentRecord& last = trace.back();
  m.results = {{"iterations", last.iter},
               {"converged", result->converged},
               {"J_est", cost_json(last.j_est)},
               {"J_col", last.j_col},
               {"J_total", cost_json(last.j_total)},
               {"gradient_norm", last.gradient_norm},
               {"pairwise_distances", pairwise_distances(result->final_state)}};
  out << "iterations " << last.iter << (result->converged ? " (converged)" : " (max_iters reached)") << "\n"
      << "J_total " << last.j_total.to_string() << "\n";
  return kOk;
}

int cmd_evaluate(const Scenario& s, const std::string& state_path, Manifest& m, std::ostream& out) {
  const StateTuple x = state_or_initial(s, state_path);
  const MeasurementModel model(s);
  const FisherInfo info = fim(x, model);
  const Cost je = j_est(info);
  std::optional<double> jc;
  try {
    jc = j_col(x, BarrierParams::from(s.optimizer));
  } catch (const BarrierPole&) {
  } catch (const InfeasibleState&) {
  }
  const Cost jt = jc ? je + *jc : Cost::infinite();

  json doc = {{"J_est", cost_json(je)},
              {"J_col", jc ? json(*jc) : json("inf")},
              {"J_total", cost_json(jt)},
              {"fim_rank", info.rank},
              {"fim_dim", info.matrix.rows()},
              {"pairwise_distances", pairwise_distances(x)}};
  if (!info.full_rank()) doc["null_direction"] = vector_json(null_direction(info));
  m.results = doc;
  m.write_file("evaluation.json", doc.dump(2) + "\n");
  out << "J_est " << je.to_string() << "\nJ_col " << (jc ? format_double(*jc) : "inf") << "\nJ_total "
      << jt.to_string() << "\nrank " << info.rank << "/" << info.matrix.rows() << "\n";
  return kOk;
}

struct CheckArgs {
  int trials = 100;
  double step = 1e-6;
  bool corrupt_sign = false;
};

int cmd_check_jacobian(const Scenario& s, const CheckArgs& a, Manifest& m, std::ostream& out) {
  if (a.trials < 1) throw InvalidArgument("--trials must be at least 1");
  m.parameters = {{"trials", a.trials}, {"step", a.step}, {"corrupt_sign", a.corrupt_sign},
                  {"tolerance", kJacobianTolerance}};
  const MeasurementModel model(s);
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  double worst = -1.0;
  int worst_trial = 0;
  StateTuple worst_state = s.initial_state;
  // Trial 0 is the scenario's own state; the rest are random tangent offsets from it.
  for (int t = 0; t < a.trials; ++t) {
    StateTuple x = s.initial_state;
    if (t > 0) {
      Vector dx(x.tangent_size());
      for (Eigen::Index i = 0; i < dx.size(); ++i) dx(i) = normal(rng);
      x = oplus(x, dx);
    }
    Matrix analytic = model.stack_jacobian(x);
    if (a.corrupt_sign) analytic.rightCols(1) *= -1.0;
    const double e = jacobian_relative_error(analytic, finite_difference_jacobian(model, x, a.step));
    if (e > worst) {
      worst = e;
      worst_trial = t;
      worst_state = x;
    }
  }
  const bool pass = worst < kJacobianTolerance;
  m.results = {{"max_relative_error", worst}, {"worst_trial", worst_trial}, {"pass", pass}};
  m.write_file("jacobian_check.json", m.results.dump(2) + "\n");
  out << "max relative error " << format_double(worst) << " over " << a.trials << " states\n";
  if (!pass) {
    m.write_file("worst_state.json", write_state(worst_state));
    m.message = "max relative error " + brief(worst) + " at trial " + std::to_string(worst_trial) + " exceeds " +
                brief(kJacobianTolerance) + "; state in worst_state.json";
    return kJacobian;
  }
  return kOk;
}

struct EstimateArgs {
  std::string state;
  std::optional<double> prior_sigma;
  std::optional<double> jitter;
};

int cmd_estimate(const Scenario& s, const EstimateArgs& a, Manifest& m, std::ostream& out) {
  const StateTuple truth = state_or_initial(s, a.state);
  const double prior_sigma = a.prior_sigma.value_or(s.estimator.prior_sigma);
  const double jitter = a.jitter.value_or(s.estimator.translation_jitter);
  m.parameters = {{"prior_sigma", prior_sigma}, {"translation_jitter", jitter}};
  const MeasurementModel model(s);
  std::mt19937_64 rng(s.seed);
  const TrialInput input = draw_trial(truth, model, prior_sigma, jitter, rng);
  const GaussNewtonResult est = gauss_newton(input.measurements, model, input.prior, input.initial);

  const Vector err = tangent_error(truth, est.state);
  json doc = json::parse(write_state(est.state));
  doc["iterations"] = est.iterations;
  doc["objective"] = est.objective;
  doc["measurements"] = vector_json(input.measurements.values);
  doc["tangent_error"] = vector_json(err);
  m.results = {{"iterations", est.iterations}, {"objective", est.objective}, {"error_norm", err.norm()}};
  m.write_file("estimate.json", doc.dump(2) + "\n");
  out << "iterations " << est.iterations << "\nerror norm " << format_double(err.norm()) << "\n";
  return kOk;
}

struct MonteCarloArgs {
  std::string trace;
  std::optional<int> trials;
  std::optional<double> prior_sigma;
  int checkpoints = 10;
};

int cmd_montecarlo(const Scenario& s, const MonteCarloArgs& a, unsigned threads, Manifest& m,
                   std::ostream& out) {
  MonteCarloOptions o;
  o.trials = a.trials.value_or(s.estimator.trials);
  o.prior_sigma = a.prior_sigma.value_or(s.estimator.prior_sigma);
  o.translation_jitter = s.estimator.translation_jitter;
  o.seed = s.seed;
  o.threads = threads;
  m.parameters = {{"trials", o.trials},
                  {"prior_sigma", o.prior_sigma},
                  {"translation_jitter", o.translation_jitter},
                  {"threads", threads},
                  {"trace", a.trace}};

  std::vector<Checkpoint> cps;
  if (a.trace.empty()) {
    m.parameters["checkpoints"] = a.checkpoints;
    cps = pick_checkpoints(descend(s).trace, a.checkpoints);
  } else {
    cps = load_trajectory(a.trace, s);
  }

  const MonteCarloReport report = monte_carlo(cps, s, o);
  m.write_file("report.csv", report_csv(report).str());
  m.write_file("report.json", report_json(report));

  std::vector<double> costs, errors;
  for (const CheckpointStats& c : report.checkpoints) {
    if (c.j_total.is_finite() && c.trials_failed < c.trials) {
      costs.push_back(c.j_total.value());
      errors.push_back(c.mse);
    }
  }
  m.results = {{"checkpoints", report.checkpoints.size()}, {"ok", report.ok()}};
  if (costs.size() >= 2) {
    const double rho = spearman(costs, errors);
    m.results["spearman_J_total_MSE"] = rho;
    out << "spearman(J_total, MSE) " << format_double(rho) << "\n";
  }
  out << report.checkpoints.size() << " checkpoints, " << o.trials << " trials each\n";
  if (!report.ok()) {
    std::string ids;
    for (const CheckpointStats& c : report.checkpoints) {
      if (c.failed) ids += (ids.empty() ? "" : ", ") + std::to_string(c.id);
    }
    m.message = "failed-trial rate above " + brief(o.max_failure_rate) + " at checkpoint(s) " + ids;
    return kMonteCarlo;
  }
  return kOk;
}

int cmd_crlb(const Scenario& s, const std::string& state_path, Manifest& m, std::ostream& out) {
  const StateTuple x = state_or_initial(s, state_path);
  const std::vector<CrlbEllipse> ellipses = crlb(x, MeasurementModel(s));
  m.write_file("ellipses.csv", ellipse_csv(ellipses, s.mode).str());
  m.results = {{"ellipses", ellipse_summary(ellipses)}};
  for (const CrlbEllipse& e : ellipses) {
    out << "agent " << e.agent_id << " area " << format_double(e.area()) << " eccentricity "
        << format_double(e.eccentricity()) << "\n";
  }
  return kOk;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--scenario", c.scenario, "scenario file or preset:NAME")->required();
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "RNG seed (overrides the scenario's)");
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

Scenario resolve_scenario(const std::string& source) {
  constexpr std::string_view prefix = "preset:";
  if (source.starts_with(prefix)) return make_preset(source.substr(prefix.size()));
  return load_scenario(source);
}

unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("FORMATION_OPT_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fisher-information formation optimizer", "formation_opt"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  OptimizeArgs optimize_args;
  CheckArgs check_args;
  EstimateArgs estimate_args;
  MonteCarloArgs mc_args;
  std::string state_path;
  std::string preset_name;

  auto* optimize = app.add_subcommand("optimize", "descend J_total and export trace, formation and ellipses");
  add_common(optimize, common);
  optimize->add_option("--checkpoints", optimize_args.checkpoints, "checkpoints along the trace")
      ->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "J_est, J_col and FIM rank at a state");
  add_common(evaluate, common);
  evaluate->add_option("--state", state_path, "state document (default: scenario initial state)");

  auto* check = app.add_subcommand("check-jacobian", "analytic vs. finite-difference measurement Jacobians");
  add_common(check, common);
  check->add_option("--trials", check_args.trials, "number of states");
  check->add_option("--step", check_args.step, "finite-difference step");
  check->add_flag("--corrupt-sign", check_args.corrupt_sign, "flip one analytic column (negative control)");

  auto* estimate = app.add_subcommand("estimate", "one synthetic Gauss-Newton estimate");
  add_common(estimate, common);
  estimate->add_option("--state", estimate_args.state, "true state (default: scenario initial state)");
  estimate->add_option("--prior-sigma", estimate_args.prior_sigma, "attitude prior std [rad]");
  estimate->add_option("--jitter", estimate_args.jitter, "initial translation jitter std [m]");

  auto* montecarlo = app.add_subcommand("montecarlo", "Monte-Carlo estimator statistics along a trajectory");
  add_common(montecarlo, common);
  montecarlo->add_option("--trace", mc_args.trace, "trajectory.json from optimize (default: run descent)");
  montecarlo->add_option("--trials", mc_args.trials, "trials per checkpoint")->check(CLI::PositiveNumber);
  montecarlo->add_option("--prior-sigma", mc_args.prior_sigma, "attitude prior std [rad]");
  montecarlo->add_option("--checkpoints", mc_args.checkpoints, "checkpoints when no trace is given")
      ->check(CLI::PositiveNumber);

  auto* crlb_cmd = app.add_subcommand("crlb", "1-sigma position ellipses from the inverse FIM");
  add_common(crlb_cmd, common);
  crlb_cmd->add_option("--state", state_path, "state document (default: scenario initial state)");

  auto* preset = app.add_subcommand("preset", "print a built-in scenario, or list them");
  preset->add_option("name", preset_name, "preset name");

  std::vector<std::string> argv_store{"formation_opt"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kFailure;
  }

  if (preset->parsed()) {
    try {
      if (preset_name.empty()) {
        for (const std::string& n : preset_names()) out << n << "\n";
      } else {
        out << write_scenario(make_preset(preset_name));
      }
      return kOk;
    } catch (const NotFound& e) {
      err << "error: " << e.what() << "\n";
      return kValidation;
    }
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest manifest(sub->get_name(), common);
  int code = kOk;
  try {
    Scenario s = resolve_scenario(common.scenario);
    if (common.seed) s.seed = *common.seed;
    manifest.seed = s.seed;
    if (sub == optimize) code = cmd_optimize(s, optimize_args, manifest, out);
    if (sub == evaluate) code = cmd_evaluate(s, state_path, manifest, out);
    if (sub == check) code = cmd_check_jacobian(s, check_args, manifest, out);
    if (sub == estimate) code = cmd_estimate(s, estimate_args, manifest, out);
    if (sub == montecarlo) code = cmd_montecarlo(s, mc_args, resolve_threads(common.threads), manifest, out);
    if (sub == crlb_cmd) code = cmd_crlb(s, state_path, manifest, out);
  } catch (const StallError& e) {
    code = kStall;
    manifest.message = std::string(e.what()) + "; trace.csv holds " + std::to_string(e.trace().size()) + " iterations";
  } catch (const ValidationError& e) {
    code = kValidation;
    manifest.message = std::string("validation failed at ") + e.what();
  } catch (const ObservabilityError& e) {
    code = kUnobservable;
    manifest.message = e.what();
    manifest.results["null_direction"] = vector_json(e.null_direction());
  } catch (const SingularGeometry& e) {
    code = kUnobservable;
    manifest.message = std::string("singular geometry: ") + e.what();
    manifest.results["edge"] = {{"index", e.edge_index()}, {"tag_i", e.tag_i()}, {"tag_j", e.tag_j()}};
  } catch (const InvalidArgument& e) {
    code = kValidation;
    manifest.message = e.what();
  } catch (const NotFound& e) {
    code = kValidation;
    manifest.message = e.what();
  } catch (const std::exception& e) {
    code = kFailure;
    manifest.message = e.what();
  }
  if (!manifest.message.empty()) err << "error: " << manifest.message << "\n";
  try {
    manifest.finish(code);
  } catch (const std::exception& e) {
    err << "error: cannot write manifest: " << e.what() << "\n";
    if (code == kOk) code = kFailure;
  }
  return code;
}

}  // namespace formation::cli
