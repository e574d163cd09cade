#include <cmath>

#include "aispo/envs.hpp"
#include "aispo/errors.hpp"
#include "aispo/format.hpp"
#include "aispo/estimators.hpp"
#include "aispo/harness.hpp"
#include "aispo/parallel.hpp"
#include "aispo/policies.hpp"

namespace aispo {
namespace {

bool interior(double p) { return p > 0.0 && p < 1.0; }

struct Moments {
  double bias = 0.0;
  double std = 0.0;
  double rmse = 0.0;
};

// Population statistics (n denominator) of `values` against `truth`, so
// rmse^2 = bias^2 + std^2 up to rounding.
Moments moments(std::span<const double> values, double truth) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  double mse = 0.0;
  for (double v : values) {
    var += (v - mean) * (v - mean);
    mse += (v - truth) * (v - truth);
  }
  return {mean - truth, std::sqrt(var / n), std::sqrt(mse / n)};
}

double sample_sd(std::span<const double> v) { return v.size() > 1 ? summarize(v).std : 0.0; }

}  // namespace

void validate_sweep_config(const SweepConfig& c) {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
  };
  require(interior(c.pi_right), "field 'pi_right' must lie in (0, 1)");
  require(!c.pi_tilde_right_grid.empty(), "field 'pi_tilde_right_grid' must not be empty");
  for (double p : c.pi_tilde_right_grid) {
    require(interior(p), "field 'pi_tilde_right_grid' entries must lie in (0, 1)");
  }
  require(!c.beta_grid.empty(), "field 'beta_grid' must not be empty");
  for (double b : c.beta_grid) {
    require(b >= 0.0 && b <= 1.0, "field 'beta_grid' entries must lie in [0, 1]");
  }
  require(c.n_trajectories > 0, "field 'n_trajectories' must be positive");
  require(c.n_replicates > 0, "field 'n_replicates' must be positive");
  require(c.n_trajectories % c.n_replicates == 0,
          "field 'n_trajectories' must be a multiple of 'n_replicates'");
  require(c.horizon > 0, "field 'horizon' must be positive");
  int free_slots = 0;
  for (const auto& slot : c.schedule_template) {
    if (!slot) {
      ++free_slots;
    } else {
      require(*slot >= 0.0 && *slot <= 1.0, "field 'schedule_template' entries must lie in [0, 1]");
    }
  }
  require(free_slots == 1, "field 'schedule_template' must contain exactly one \"beta\" slot");
  require(!c.beta_fills_prefix || !c.schedule_template.front(),
          "field 'beta_fills_prefix' needs \"beta\" as the first template entry");
  require(c.nchain_states >= 2, "field 'nchain_states' must be at least 2");
  require(c.slip >= 0.0 && c.slip <= 1.0, "field 'slip' must lie in [0, 1]");
  require(c.gamma > 0.0 && c.gamma < 1.0, "field 'gamma' must lie in (0, 1)");
}

std::vector<SweepRow> nchain_sweep(const SweepConfig& config, int threads) {
  validate_sweep_config(config);
  const TabularMdp mdp = nchain_new(config.nchain_states, config.slip, config.gamma);
  const int S = mdp.n_states();
  const auto bernoulli = [S](double right) {
    Eigen::Vector2d p;
    p[kNChainForward] = right;
    p[kNChainBackward] = 1.0 - right;
    return TabularSoftmaxPolicy::state_independent(S, p);
  };
  const TabularSoftmaxPolicy pi = bernoulli(config.pi_right);
  const ExactSolution solution = solve_policy_exact(mdp, pi.probabilities());

  const std::size_t n_beta = config.beta_grid.size();
  std::vector<SweepRow> rows(config.pi_tilde_right_grid.size() * n_beta);
  const std::size_t n = static_cast<std::size_t>(config.n_trajectories);
  const std::size_t replicates = static_cast<std::size_t>(config.n_replicates);
  const std::size_t per_replicate = n / replicates;

  parallel_for(rows.size(), threads, [&](std::size_t g) {
    const double right = config.pi_tilde_right_grid[g / n_beta];
    const double beta = config.beta_grid[g % n_beta];
    const TabularSoftmaxPolicy tilde = bernoulli(right);
    const AlphaSchedule schedule = schedule_from_template(
        config.schedule_template, beta, config.beta_fills_prefix, config.horizon);
    const double truth = value_difference_exact(mdp, pi.probabilities(), tilde.probabilities());

    std::vector<double> estimates(n);
    for (std::size_t k = 0; k < n; ++k) {
      CounterRng rng(config.seed, Stream::kSweep, g, k);
      const Trajectory traj = sample_trajectory(mdp, pi, config.horizon, rng);
      const std::vector<double> lr = log_ratios(traj, tilde);
      const std::vector<double> adv = exact_advantages(traj, solution);
      estimates[k] = l_alpha_from_log_ratios(lr, adv, schedule, mdp.gamma());
    }

    std::vector<double> replicate_means(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
      replicate_means[r] =
          mean_in_order(std::span<const double>(estimates).subspan(r * per_replicate, per_replicate));
    }

    SweepRow& row = rows[g];
    row.pi_tilde_right = right;
    row.beta = beta;
    row.n_traj = config.n_trajectories;
    row.n_replicates = config.n_replicates;
    row.oracle_truth = truth;
    row.seed = config.seed;
    const double root_r = std::sqrt(static_cast<double>(replicates));

    if (config.dispersion == Dispersion::kPerTrajectory) {
      const Moments m = moments(estimates, truth);
      row.bias = m.bias;
      row.std = m.std;
      row.rmse = m.rmse;
      // Batch means: the same statistics on each replicate slice.
      std::vector<double> b(replicates), s(replicates), e(replicates);
      for (std::size_t r = 0; r < replicates; ++r) {
        const Moments mr = moments(
            std::span<const double>(estimates).subspan(r * per_replicate, per_replicate), truth);
        b[r] = mr.bias;
        s[r] = mr.std;
        e[r] = mr.rmse;
      }
      row.bias_se = sample_sd(b) / root_r;
      row.std_se = sample_sd(s) / root_r;
      row.rmse_se = sample_sd(e) / root_r;
    } else {
      const Moments m = moments(replicate_means, truth);
      row.bias = m.bias;
      row.std = m.std;
      row.rmse = m.rmse;
      row.bias_se = sample_sd(replicate_means) / root_r;
      row.std_se = replicates > 1 ? m.std / std::sqrt(2.0 * static_cast<double>(replicates - 1)) : 0.0;
      row.rmse_se = m.rmse > 0.0 ? std::hypot(m.bias * row.bias_se, m.std * row.std_se) / m.rmse : 0.0;
    }
  });
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "pi_tilde_right,beta,n_traj,n_replicates,bias,std,rmse,oracle_truth,seed\n";
  for (const SweepRow& r : rows) {
    out << format_real(r.pi_tilde_right) << ',' << format_real(r.beta) << ',' << r.n_traj << ','
        << r.n_replicates << ',' << format_real(r.bias) << ',' << format_real(r.std) << ','
        << format_real(r.rmse) << ',' << format_real(r.oracle_truth) << ',' << r.seed << '\n';
  }
}

}  // namespace aispo
