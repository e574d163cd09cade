#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "aispo/config_io.hpp"
#include "aispo/errors.hpp"
#include "aispo/format.hpp"
#include "aispo/harness.hpp"
#include "aispo/mdp_io.hpp"
#include "aispo/optimizer.hpp"
#include "aispo/policy_io.hpp"

namespace aispo {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInvalidConfig = 3;
constexpr int kExitRuntime = 4;

constexpr long long kFullScaleTrajectories = 500000;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  int threads = 1;
};

void write_output(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot write output file '" + path + "'");
  file << text;
  if (!file) throw ValidationError("failed writing output file '" + path + "'");
}

std::string config_text(const GlobalOptions& g) {
  return g.config.empty() ? std::string() : read_text_file(g.config);
}

std::string source_name(const GlobalOptions& g) { return g.config.empty() ? "defaults" : g.config; }

/// "runs/a.csv" -> "runs/a.policy.toml"
std::string policy_path_for(const std::string& out) {
  const std::size_t slash = out.find_last_of('/');
  const std::size_t dot = out.find_last_of('.');
  const std::string stem = (dot != std::string::npos && (slash == std::string::npos || dot > slash))
                               ? out.substr(0, dot)
                               : out;
  return stem + ".policy.toml";
}

std::string real(double x) { return format_real(x); }

std::string vector_toml(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + real(v[i]);
  return s + "]";
}

std::string matrix_toml(const Eigen::MatrixXd& m) {
  std::string s = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) s += (r ? ", " : "") + vector_toml(m.row(r).transpose());
  return s + "]";
}

int run_sweep(const GlobalOptions& g, bool full_scale, std::ostream& out) {
  SweepConfig config = parse_sweep_config(config_text(g), source_name(g));
  if (g.seed) config.seed = *g.seed;
  if (full_scale) config.n_trajectories = kFullScaleTrajectories;
  validate_sweep_config(config);
  std::ostringstream csv;
  write_sweep_csv(csv, nchain_sweep(config, g.threads));
  write_output(g.out, csv.str(), out);
  return kExitOk;
}

template <class Task, class Critic>
int finish_train(const GlobalOptions& g, const Task& task, typename Task::Policy policy,
                 Critic critic, const OptimConfig& optim, std::ostream& out) {
  TrainOptions<Task> options;
  options.threads = g.threads;
  const auto result = train(task, std::move(policy), std::move(critic), optim, options);
  std::ostringstream csv;
  write_learning_curve_csv(csv, result.curve);
  write_output(g.out, csv.str(), out);
  if (!g.out.empty()) write_output(policy_path_for(g.out), policy_to_toml(result.final_policy), out);
  return kExitOk;
}

int run_train(const GlobalOptions& g, std::ostream& out) {
  TrainConfig config = parse_train_config(config_text(g), source_name(g));
  if (g.seed) config.optim.seed = *g.seed;
  const OptimConfig& optim = config.optim;
  if (const auto* chain = std::get_if<NChainEnvSpec>(&config.env)) {
    TabularTask task{nchain_new(chain->n_states, chain->slip, optim.gamma), optim.horizon};
    return finish_train(g, task, TabularSoftmaxPolicy(chain->n_states, 2), TabularCritic(chain->n_states),
                        optim, out);
  }
  const auto& params = std::get<PointMassParams>(config.env);
  PointMassTask task{PointMassEnv(params)};
  return finish_train(g, task,
                      GaussianMlpPolicy(PointMassEnv::kStateDim, PointMassEnv::kActionDim, optim.seed),
                      MlpCritic(PointMassEnv::kStateDim, optim.seed, optim.value_learning_rate,
                                optim.value_epochs, optim.minibatch_size),
                      optim, out);
}

int run_check(const GlobalOptions& g, const std::string& fault, const std::string& estimator_report,
              std::ostream& out, std::ostream& err) {
  CheckConfig config = parse_check_config(config_text(g), source_name(g));
  if (g.seed) config.seed = *g.seed;
  if (fault == "occupancy_scale") {
    config.fault = OracleFault::kOccupancyScale;
  } else if (fault == "none") {
    config.fault = OracleFault::kNone;
  }
  const CheckReport report = theory_check_suite(config, g.threads);
  std::ostringstream csv;
  write_check_report_csv(csv, report);
  write_output(g.out, csv.str(), out);
  if (!estimator_report.empty()) {
    std::ostringstream est;
    write_estimator_report_csv(est, report.estimators);
    write_output(estimator_report, est.str(), out);
  }
  std::size_t failed = 0;
  for (const CheckRow& r : report.rows) {
    if (!r.passed()) {
      ++failed;
      err << "FAIL " << r.check_name << ": measured " << real(r.measured) << ", bound "
          << real(r.bound_or_target) << ", tolerance " << real(r.tolerance) << "\n";
    }
  }
  err << report.rows.size() - failed << "/" << report.rows.size() << " checks passed\n";
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

int run_solve(const GlobalOptions& g, const std::string& policy_path, std::ostream& out) {
  if (g.config.empty()) throw ValidationError("solve needs --config with an MDP document");
  SolveInput input = parse_solve_input(read_text_file(g.config), g.config);
  PolicyTable policy;
  if (!policy_path.empty()) {
    policy = policy_table_from_file(policy_path);
  } else if (input.policy) {
    policy = *input.policy;
  } else {
    policy = PolicyTable::Constant(input.mdp.n_states(), input.mdp.n_actions(),
                                   1.0 / input.mdp.n_actions());
  }
  try {
    validate_policy(input.mdp, policy);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("policy: ") + e.what());
  }
  const ExactSolution sol = solve_policy_exact(input.mdp, policy);
  std::ostringstream doc;
  doc << "eta = " << real(sol.eta) << "\n";
  doc << "v = " << vector_toml(sol.v) << "\n";
  doc << "q = " << matrix_toml(sol.q) << "\n";
  doc << "adv = " << matrix_toml(sol.adv) << "\n";
  doc << "d_pi = " << vector_toml(sol.d_pi) << "\n";
  doc << "policy = " << matrix_toml(policy) << "\n";
  write_output(g.out, doc.str(), out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Smoothed importance-sampling policy optimization toolkit", "aispo"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the seed of the config");
  app.add_option("--out", g.out, "Output path (stdout when omitted)");
  app.add_option("--config", g.config, "TOML config file")->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "NChain bias / std / RMSE sweep -> CSV")->fallthrough();
  bool full_scale = false;
  sweep->add_flag("--full-scale", full_scale, "Use 5e5 trajectories per grid point");

  auto* train_cmd =
      app.add_subcommand("train", "Train a policy -> learning-curve CSV and <out stem>.policy.toml")
          ->fallthrough();

  auto* check = app.add_subcommand("check", "Run the theory check suite -> report CSV")->fallthrough();
  std::string fault;
  std::string estimator_report;
  check->add_option("--fault", fault, "Inject an oracle fault")
      ->check(CLI::IsMember({"none", "occupancy_scale"}));
  check->add_option("--estimator-report", estimator_report, "Also write the estimator report CSV");

  auto* solve = app.add_subcommand("solve", "Exact solution of an MDP and policy -> TOML")->fallthrough();
  std::string policy_path;
  solve->add_option("--policy", policy_path, "Tabular policy file")->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (sweep->parsed()) return run_sweep(g, full_scale, out);
    if (train_cmd->parsed()) return run_train(g, out);
    if (check->parsed()) return run_check(g, fault, estimator_report, out, err);
    if (solve->parsed()) return run_solve(g, policy_path, out);
  } catch (const ValidationError& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << "usage error: no subcommand\n";
  return kExitUsage;
}

}  // namespace aispo
