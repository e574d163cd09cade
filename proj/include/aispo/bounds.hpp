#pragma once

#include <span>
#include <vector>

#include "aispo/envs.hpp"
#include "aispo/estimators.hpp"
#include "aispo/mdp.hpp"
#include "aispo/policies.hpp"
#include "aispo/schedule.hpp"

namespace aispo {

/// ((1 - gamma^H) / (1 - gamma)) eps^2 sum_{t<H} gamma^t c_rho^(2 |alpha_t|_1),
/// where H = horizon is the number of steps (last index T = H - 1).
double variance_bound(const AlphaSchedule& schedule, double c_rho, double epsilon,
                             double gamma, int horizon);

/// eps^2 c_partial^2 c_delta^2 c_gamma sum_{t<H} gamma^t |alpha_t|_1^2
double grad_variance_bound(double c_partial, double c_delta, double c_gamma,
                                  double epsilon, double gamma, const AlphaSchedule& schedule,
                                  int horizon);

// Per-trajectory integrands. `log_ratio` holds log(pi_tilde / pi) at each
// visited (s_i, a_i); each bound is epsilon (times constants) times the
// expectation of its integrand under the stated sampling policy.

/// sum_t gamma^t |prod_{i<=t} rho_i^(1 - alpha_t^i) - 1|, expectation under pi_tilde.
double bias_integrand(std::span<const double> log_ratio, const AlphaSchedule& schedule,
                                double gamma);
/// sum_t gamma^t |rho_hat_t - 1|: the same bias integrand with exponents alpha
/// instead of 1 - alpha. Reported next to bias_integrand for comparison.
double bias_integrand_exponent_alpha(std::span<const double> log_ratio, const AlphaSchedule& schedule,
                            double gamma);
/// sum_t gamma^t [rho_hat_t |alpha_t - 1|_1 + (t + 1) |rho_hat_t - rho_{0:t}|], under pi.
double grad_bias_integrand(std::span<const double> log_ratio, const AlphaSchedule& schedule,
                           double gamma);
/// sum_t gamma^t rho_hat_t^2, under pi; its mean is the c_gamma constant.
double squared_ratio_integrand(std::span<const double> log_ratio, const AlphaSchedule& schedule,
                               double gamma);

/// log pi_tilde(a_i|s_i) - log pi(a_i|s_i) regardless of which policy sampled.
std::vector<double> log_ratios_between(const Trajectory& traj, const TabularSoftmaxPolicy& pi_tilde,
                                       const TabularSoftmaxPolicy& pi);

struct BoundEstimate {
  double value = 0.0;
  double se = 0.0;
};

/// Bias bound eps * E_{pi_tilde}[bias_integrand] from trajectories sampled with
/// pi_tilde.
BoundEstimate bias_bound(const std::vector<Trajectory>& trajectories_from_pi_tilde,
                                const TabularSoftmaxPolicy& pi_tilde,
                                const TabularSoftmaxPolicy& pi, const AlphaSchedule& schedule,
                                double epsilon, double gamma);
BoundEstimate bias_bound_exponent_alpha_form(
    const std::vector<Trajectory>& trajectories_from_pi_tilde, const TabularSoftmaxPolicy& pi_tilde,
    const TabularSoftmaxPolicy& pi, const AlphaSchedule& schedule, double epsilon, double gamma);

/// Gradient-bias bound from trajectories sampled with pi.
BoundEstimate grad_bias_bound(const std::vector<Trajectory>& trajectories_from_pi,
                                     const TabularSoftmaxPolicy& pi_tilde,
                                     const AlphaSchedule& schedule, double epsilon,
                                     double c_partial, double gamma);

/// Assumption constants measured by maximizing over the finite state-action
/// space (only pairs with pi(a|s) > 0 are considered).
struct BoundConstants {
  double c_rho = 0.0;          // max pi_tilde / pi
  double epsilon = 0.0;        // max |A^pi|
  double c_score = 0.0;        // max |grad log pi_tilde|_2, the gradient-bias constant
  double c_partial_ratio = 0.0;  // max |grad pi_tilde|_2 / pi, the gradient-variance constant
  double c_delta = 0.0;        // max pi / pi_tilde
};
BoundConstants measure_bound_constants(const TabularMdp& mdp, const TabularSoftmaxPolicy& pi,
                                       const TabularSoftmaxPolicy& pi_tilde);

}  // namespace aispo
