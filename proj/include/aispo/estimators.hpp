#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aispo/envs.hpp"
#include "aispo/errors.hpp"
#include "aispo/mdp.hpp"
#include "aispo/parallel.hpp"
#include "aispo/schedule.hpp"

namespace aispo {

/// log pi_tilde(a_i|s_i) - behavior_log_prob_i for every step.
template <class Policy, class S, class A>
std::vector<double> log_ratios(const BasicTrajectory<S, A>& traj, const Policy& pi_tilde) {
  std::vector<double> out(traj.transitions.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& tr = traj.transitions[i];
    out[i] = pi_tilde.log_prob(tr.state, tr.action) - tr.behavior_log_prob;
  }
  return out;
}

/// sum_i alpha_t^i * log_ratio_i, accumulated in increasing i. Steps with
/// zero weight are skipped; a non-finite weighted step throws NumericError
/// naming (t, i).
double smoothed_log_ratio(std::span<const double> log_ratio, const AlphaSchedule& schedule, int t);

inline double smoothed_ratio_from_log_ratios(std::span<const double> log_ratio,
                                             const AlphaSchedule& schedule, int t) {
  return std::exp(smoothed_log_ratio(log_ratio, schedule, t));
}

/// prod_{i<=t} rho_i^{alpha_t^i}, the product starting at i = 0.
template <class Policy, class S, class A>
double smoothed_ratio_product(const BasicTrajectory<S, A>& traj, const Policy& pi_tilde,
                              const AlphaSchedule& schedule, int t) {
  if (t < 0 || t >= traj.size()) throw ValidationError("t outside the trajectory");
  std::vector<double> lr(static_cast<std::size_t>(t) + 1, 0.0);
  for (int i = schedule.first_index(t); i <= t; ++i) {
    const auto& tr = traj[i];
    lr[i] = pi_tilde.log_prob(tr.state, tr.action) - tr.behavior_log_prob;
  }
  return smoothed_ratio_from_log_ratios(lr, schedule, t);
}

/// sum_t gamma^t rho_hat_t A_t for one trajectory given its log ratios.
double l_alpha_from_log_ratios(std::span<const double> log_ratio,
                               std::span<const double> advantages,
                               const AlphaSchedule& schedule, double gamma);

template <class Policy, class S, class A>
double l_alpha_per_trajectory(const BasicTrajectory<S, A>& traj, const Policy& pi_tilde,
                              const AlphaSchedule& schedule, std::span<const double> advantages,
                              double gamma) {
  if (static_cast<int>(advantages.size()) != traj.size()) {
    throw ValidationError("advantages are not aligned with the trajectory");
  }
  const std::vector<double> lr = log_ratios(traj, pi_tilde);
  return l_alpha_from_log_ratios(lr, advantages, schedule, gamma);
}

/// One value of sum_t gamma^t rho_hat_t A_t per trajectory, in input order.
template <class Policy, class S, class A>
std::vector<double> l_alpha_samples(const std::vector<BasicTrajectory<S, A>>& trajectories,
                                    const Policy& pi_tilde, const AlphaSchedule& schedule,
                                    const std::vector<std::vector<double>>& advantages,
                                    double gamma, int threads = 1) {
  if (trajectories.empty()) throw ValidationError("no trajectories to estimate from");
  if (advantages.size() != trajectories.size()) {
    throw ValidationError("one advantage vector per trajectory is required");
  }
  std::vector<double> out(trajectories.size());
  parallel_for(out.size(), threads, [&](std::size_t k) {
    out[k] = l_alpha_per_trajectory(trajectories[k], pi_tilde, schedule, advantages[k], gamma);
  });
  return out;
}

double mean_in_order(std::span<const double> values);

/// Sample mean of the per-trajectory estimates.
template <class Policy, class S, class A>
double l_alpha_estimate(const std::vector<BasicTrajectory<S, A>>& trajectories,
                        const Policy& pi_tilde, const AlphaSchedule& schedule,
                        const std::vector<std::vector<double>>& advantages, double gamma,
                        int threads = 1) {
  return mean_in_order(l_alpha_samples(trajectories, pi_tilde, schedule, advantages, gamma, threads));
}

/// The all-ones schedule covering the longest trajectory.
template <class S, class A>
AlphaSchedule importance_sampling_schedule(const std::vector<BasicTrajectory<S, A>>& trajectories) {
  int longest = 1;
  for (const auto& t : trajectories) longest = std::max(longest, t.size());
  return AlphaSchedule::all_ones(longest);
}

template <class Policy, class S, class A>
double is_estimate(const std::vector<BasicTrajectory<S, A>>& trajectories, const Policy& pi_tilde,
                   const std::vector<std::vector<double>>& advantages, double gamma,
                   int threads = 1) {
  if (trajectories.empty()) throw ValidationError("no trajectories to estimate from");
  return l_alpha_estimate(trajectories, pi_tilde, importance_sampling_schedule(trajectories),
                          advantages, gamma, threads);
}

/// min(clamp(rho, 1 - omega, 1 + omega) * adv, rho * adv)
inline double clip_objective(double rho, double adv, double omega) {
  const double clamped = std::min(std::max(rho, 1.0 - omega), 1.0 + omega);
  return std::min(clamped * adv, rho * adv);
}

/// True when the clamped branch is strictly below the unclipped one, i.e. the
/// term has zero gradient. Ties count as unclipped.
inline bool clip_active(double rho, double adv, double omega) {
  const double clamped = std::min(std::max(rho, 1.0 - omega), 1.0 + omega);
  return clamped * adv < rho * adv;
}

template <class Policy, class S, class A>
double clipped_objective_term(const BasicTrajectory<S, A>& traj, const Policy& pi_tilde,
                              const AlphaSchedule& schedule, std::span<const double> advantages,
                              int t, double omega) {
  if (!(omega > 0.0 && omega < 1.0)) throw ValidationError("clip omega must lie in (0, 1)");
  if (static_cast<int>(advantages.size()) != traj.size()) {
    throw ValidationError("advantages are not aligned with the trajectory");
  }
  return clip_objective(smoothed_ratio_product(traj, pi_tilde, schedule, t), advantages[t], omega);
}

struct AdvantageEstimate {
  std::vector<double> advantages;
  std::vector<double> values;  // V(s_t) used as the baseline
  double bootstrap_value = 0.0;
};

/// Backward GAE recursion. The last next_state is bootstrapped with
/// value_fn unless `bootstrap` is false (a true episode end).
template <class S, class A, class ValueFn>
AdvantageEstimate gae(const BasicTrajectory<S, A>& traj, ValueFn&& value_fn, double gamma,
                      double lambda, bool bootstrap = true) {
  const int n = traj.size();
  AdvantageEstimate est;
  est.advantages.assign(n, 0.0);
  est.values.resize(n);
  for (int t = 0; t < n; ++t) est.values[t] = value_fn(traj[t].state);
  est.bootstrap_value = (bootstrap && n > 0) ? value_fn(traj[n - 1].next_state) : 0.0;
  double running = 0.0;
  double next_value = est.bootstrap_value;
  for (int t = n - 1; t >= 0; --t) {
    const double delta = traj[t].reward + gamma * next_value - est.values[t];
    running = delta + gamma * lambda * running;
    if (!std::isfinite(running)) {
      throw NumericError("non-finite advantage at t=" + std::to_string(t));
    }
    est.advantages[t] = running;
    next_value = est.values[t];
  }
  return est;
}

/// Discounted return-to-go, with `tail_value` standing in for everything
/// after the last step.
template <class S, class A>
std::vector<double> discounted_returns(const BasicTrajectory<S, A>& traj, double gamma,
                                       double tail_value) {
  std::vector<double> out(traj.transitions.size());
  double running = tail_value;
  for (int t = traj.size() - 1; t >= 0; --t) {
    running = traj[t].reward + gamma * running;
    out[t] = running;
  }
  return out;
}

/// A^pi(s_t, a_t) read from an exact solution.
std::vector<double> exact_advantages(const Trajectory& traj, const ExactSolution& solution);
std::vector<std::vector<double>> exact_advantages(const std::vector<Trajectory>& trajectories,
                                                  const ExactSolution& solution);

struct SampleStats {
  double mean = 0.0;
  double std = 0.0;  // n - 1 denominator
  double se = 0.0;
  std::size_t n = 0;
};
SampleStats summarize(std::span<const double> values);

struct EstimatorReportRow {
  std::string estimator_name;
  std::string schedule;
  std::size_t n_traj = 0;
  int horizon = 0;
  double mean = 0.0;
  double std = 0.0;
  double bias_vs_oracle = 0.0;
  double bound_value = 0.0;
};

void write_estimator_report_csv(std::ostream& out, const std::vector<EstimatorReportRow>& rows);

}  // namespace aispo
