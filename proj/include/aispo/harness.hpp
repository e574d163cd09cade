#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aispo/estimators.hpp"
#include "aispo/mdp.hpp"

namespace aispo {

// ---------------------------------------------------------------- sweep

/// How the std column of a sweep is measured. kPerTrajectory pools all
/// trajectories of a grid point and reports the spread of single-trajectory
/// estimates; kPerReplicate reports the spread of the replicate means.
enum class Dispersion { kPerTrajectory, kPerReplicate };

struct SweepConfig {
  double pi_right = 0.5;
  std::vector<double> pi_tilde_right_grid{0.7, 0.75, 0.8, 0.85, 0.9};
  std::vector<double> beta_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  long long n_trajectories = 50000;
  int n_replicates = 50;
  int horizon = 62;
  std::uint64_t seed = 0;
  // std::nullopt marks the free beta slot: (beta, 1) by default.
  std::vector<std::optional<double>> schedule_template{std::nullopt, 1.0};
  bool beta_fills_prefix = false;
  Dispersion dispersion = Dispersion::kPerTrajectory;
  int nchain_states = 5;
  double slip = 0.2;
  double gamma = 0.8;
};

void validate_sweep_config(const SweepConfig& config);

struct SweepRow {
  double pi_tilde_right = 0.0;
  double beta = 0.0;
  long long n_traj = 0;
  int n_replicates = 0;
  double bias = 0.0;
  double std = 0.0;
  double rmse = 0.0;
  double oracle_truth = 0.0;
  std::uint64_t seed = 0;
  // Standard errors of bias, std and rmse (batch means over replicates in
  // kPerTrajectory mode). Not part of the CSV.
  double bias_se = 0.0;
  double std_se = 0.0;
  double rmse_se = 0.0;
};

/// Bias, std and RMSE of the smoothed estimator against the exact value
/// difference, on NChain with state-independent Bernoulli policies and exact
/// advantages. Grid point g draws its trajectories from
/// CounterRng(seed, Stream::kSweep, g, k); rows come back in grid order
/// (pi_tilde major, beta minor) whatever `threads` is.
std::vector<SweepRow> nchain_sweep(const SweepConfig& config, int threads = 1);

/// pi_tilde_right, beta, n_traj, n_replicates, bias, std, rmse, oracle_truth, seed
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// ---------------------------------------------------------------- checks

struct CheckConfig {
  std::uint64_t seed = 0;
  OracleFault fault = OracleFault::kNone;
  double sigma = 3.0;  // statistical slack in standard errors

  // NChain instance and policies
  int nchain_states = 5;
  double slip = 0.2;
  double gamma = 0.8;
  int horizon = 62;
  double pi_right = 0.5;
  std::vector<double> pi_tilde_right_grid{0.7, 0.75, 0.8, 0.85, 0.9};

  // exact identities
  int random_instances = 100;
  int random_states = 4;
  int random_actions = 3;
  double random_gamma = 0.9;
  double identity_tolerance = 1e-9;
  double value_iteration_tolerance = 1e-10;

  // estimator statistics
  long long is_trajectories = 100000;
  long long bound_trajectories = 100000;
  long long gradient_trajectories = 10000;
  double bound_pi_tilde_right = 0.7;
  std::vector<std::vector<double>> bound_schedules{{1.0}, {0.5, 1.0}, {0.5, 0.5, 1.0}, {0.0}};
  std::vector<std::vector<double>> consistency_schedules{{1.0}, {0.5, 1.0}, {0.5, 0.5, 1.0}, {1.0, 1.0}};

  // exhaustive enumeration
  int enumeration_instances = 20;
  int enumeration_horizon = 4;
  double enumeration_gamma = 0.9;

  // finite differences
  int gradient_points = 50;
  double fd_step = 1e-5;
  double fd_tolerance = 1e-6;
};

void validate_check_config(const CheckConfig& config);

struct CheckRow {
  std::string check_name;
  double measured = 0.0;
  double bound_or_target = 0.0;
  double tolerance = 0.0;

  double margin() const { return bound_or_target + tolerance - measured; }
  bool passed() const { return margin() >= 0.0; }
};

struct CheckReport {
  std::vector<CheckRow> rows;
  std::vector<EstimatorReportRow> estimators;

  bool all_passed() const;
};

/// Names of every check theory_check_suite registers for `config`, in
/// report order.
std::vector<std::string> registered_checks(const CheckConfig& config);

/// Runs every registered check. A row passes when
/// measured <= bound_or_target + tolerance.
CheckReport theory_check_suite(const CheckConfig& config, int threads = 1);

/// check_name, measured, bound_or_target, tolerance, margin, status
void write_check_report_csv(std::ostream& out, const CheckReport& report);

// ---------------------------------------------------------------- gradient checks

/// Largest relative error between analytic and central-difference gradients
/// over `points` seeded configurations. Exposed for the test suite.
struct GradientCheckResult {
  double max_relative_error = 0.0;
  int points = 0;
  int skipped_near_kink = 0;  // seeds redrawn because a ratio sat within 1e-3 of a clip edge
  int points_with_active_clip = 0;
};

enum class GradientTarget { kLogProb, kTerm, kMinibatchUnclipped, kMinibatchClipped };

GradientCheckResult check_tabular_gradients(GradientTarget target, int points, std::uint64_t seed,
                                            double fd_step = 1e-5);
GradientCheckResult check_gaussian_gradients(GradientTarget target, int points, std::uint64_t seed,
                                             double fd_step = 1e-5);

// ---------------------------------------------------------------- CLI

/// Subcommands sweep, train, check and solve with global --seed, --out,
/// --config and --threads. Returns 0 on success, 1 when a check fails, 2 on
/// usage errors, 3 when a config fails validation and 4 on any other runtime
/// error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aispo
