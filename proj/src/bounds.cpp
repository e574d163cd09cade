#include "aispo/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "aispo/errors.hpp"

namespace aispo {
namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in (0, 1)");
}

BoundEstimate scaled_mean(const std::vector<double>& values, double scale) {
  const SampleStats st = summarize(values);
  return {scale * st.mean, scale * st.se};
}

}  // namespace

double variance_bound(const AlphaSchedule& schedule, double c_rho, double epsilon,
                             double gamma, int horizon) {
  if (!(c_rho >= 1.0)) throw ValidationError("c_rho must be at least 1");
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  check_gamma(gamma);
  double sum = 0.0;
  double discount = 1.0;
  for (int t = 0; t < horizon; ++t) {
    sum += discount * std::pow(c_rho, 2.0 * schedule.l1_norm(t));
    discount *= gamma;
  }
  const double geometric = (1.0 - std::pow(gamma, horizon)) / (1.0 - gamma);
  return geometric * epsilon * epsilon * sum;
}

double grad_variance_bound(double c_partial, double c_delta, double c_gamma,
                                  double epsilon, double gamma, const AlphaSchedule& schedule,
                                  int horizon) {
  if (!(c_partial > 0.0 && c_delta > 0.0 && c_gamma > 0.0 && epsilon > 0.0)) {
    throw ValidationError("gradient variance constants must be positive");
  }
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  check_gamma(gamma);
  double sum = 0.0;
  double discount = 1.0;
  for (int t = 0; t < horizon; ++t) {
    const double l1 = schedule.l1_norm(t);
    sum += discount * l1 * l1;
    discount *= gamma;
  }
  return epsilon * epsilon * c_partial * c_partial * c_delta * c_delta * c_gamma * sum;
}

double bias_integrand(std::span<const double> log_ratio, const AlphaSchedule& schedule,
                                double gamma) {
  double total = 0.0;
  double discount = 1.0;
  double cumulative = 0.0;
  for (int t = 0; t < static_cast<int>(log_ratio.size()); ++t) {
    cumulative += log_ratio[t];
    // sum_i (1 - alpha_t^i) lr_i = cumulative - sum_i alpha_t^i lr_i
    const double exponent = cumulative - smoothed_log_ratio(log_ratio, schedule, t);
    total += discount * std::abs(std::exp(exponent) - 1.0);
    discount *= gamma;
  }
  return total;
}

double bias_integrand_exponent_alpha(std::span<const double> log_ratio, const AlphaSchedule& schedule,
                            double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (int t = 0; t < static_cast<int>(log_ratio.size()); ++t) {
    total += discount * std::abs(smoothed_ratio_from_log_ratios(log_ratio, schedule, t) - 1.0);
    discount *= gamma;
  }
  return total;
}

double grad_bias_integrand(std::span<const double> log_ratio, const AlphaSchedule& schedule,
                           double gamma) {
  double total = 0.0;
  double discount = 1.0;
  double cumulative = 0.0;
  for (int t = 0; t < static_cast<int>(log_ratio.size()); ++t) {
    cumulative += log_ratio[t];
    const double smoothed = smoothed_ratio_from_log_ratios(log_ratio, schedule, t);
    const double full = std::exp(cumulative);
    total += discount * (smoothed * schedule.l1_distance_to_ones(t) +
                         static_cast<double>(t + 1) * std::abs(smoothed - full));
    discount *= gamma;
  }
  return total;
}

double squared_ratio_integrand(std::span<const double> log_ratio, const AlphaSchedule& schedule,
                               double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (int t = 0; t < static_cast<int>(log_ratio.size()); ++t) {
    const double r = smoothed_ratio_from_log_ratios(log_ratio, schedule, t);
    total += discount * r * r;
    discount *= gamma;
  }
  return total;
}

std::vector<double> log_ratios_between(const Trajectory& traj, const TabularSoftmaxPolicy& pi_tilde,
                                       const TabularSoftmaxPolicy& pi) {
  std::vector<double> out(traj.transitions.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Transition& tr = traj.transitions[i];
    const double lp = pi.log_prob(tr.state, tr.action);
    if (!std::isfinite(lp)) throw SupportError("pi assigns zero probability to a visited action");
    out[i] = pi_tilde.log_prob(tr.state, tr.action) - lp;
  }
  return out;
}

BoundEstimate bias_bound(const std::vector<Trajectory>& trajectories_from_pi_tilde,
                                const TabularSoftmaxPolicy& pi_tilde,
                                const TabularSoftmaxPolicy& pi, const AlphaSchedule& schedule,
                                double epsilon, double gamma) {
  if (trajectories_from_pi_tilde.empty()) throw ValidationError("no trajectories for the bias bound");
  std::vector<double> values;
  values.reserve(trajectories_from_pi_tilde.size());
  for (const Trajectory& tr : trajectories_from_pi_tilde) {
    values.push_back(bias_integrand(log_ratios_between(tr, pi_tilde, pi), schedule, gamma));
  }
  return scaled_mean(values, epsilon);
}

BoundEstimate bias_bound_exponent_alpha_form(
    const std::vector<Trajectory>& trajectories_from_pi_tilde, const TabularSoftmaxPolicy& pi_tilde,
    const TabularSoftmaxPolicy& pi, const AlphaSchedule& schedule, double epsilon, double gamma) {
  if (trajectories_from_pi_tilde.empty()) throw ValidationError("no trajectories for the bias bound");
  std::vector<double> values;
  values.reserve(trajectories_from_pi_tilde.size());
  for (const Trajectory& tr : trajectories_from_pi_tilde) {
    values.push_back(bias_integrand_exponent_alpha(log_ratios_between(tr, pi_tilde, pi), schedule, gamma));
  }
  return scaled_mean(values, epsilon);
}

BoundEstimate grad_bias_bound(const std::vector<Trajectory>& trajectories_from_pi,
                                     const TabularSoftmaxPolicy& pi_tilde,
                                     const AlphaSchedule& schedule, double epsilon,
                                     double c_partial, double gamma) {
  if (trajectories_from_pi.empty()) throw ValidationError("no trajectories for the gradient bias bound");
  std::vector<double> values;
  values.reserve(trajectories_from_pi.size());
  for (const Trajectory& tr : trajectories_from_pi) {
    values.push_back(grad_bias_integrand(log_ratios(tr, pi_tilde), schedule, gamma));
  }
  return scaled_mean(values, epsilon * c_partial);
}

BoundConstants measure_bound_constants(const TabularMdp& mdp, const TabularSoftmaxPolicy& pi,
                                       const TabularSoftmaxPolicy& pi_tilde) {
  const PolicyTable p = pi.probabilities();
  const PolicyTable q = pi_tilde.probabilities();
  const ExactSolution sol = solve_policy_exact(mdp, p);
  BoundConstants c;
  c.epsilon = sol.adv.cwiseAbs().maxCoeff();
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      if (p(s, a) <= 0.0) continue;
      c.c_rho = std::max(c.c_rho, q(s, a) / p(s, a));
      if (q(s, a) > 0.0) c.c_delta = std::max(c.c_delta, p(s, a) / q(s, a));
      const double score = pi_tilde.grad_log_prob(s, a).norm();
      c.c_score = std::max(c.c_score, score);
      c.c_partial_ratio = std::max(c.c_partial_ratio, q(s, a) * score / p(s, a));
    }
  }
  return c;
}

}  // namespace aispo
