#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "aispo/bounds.hpp"
#include "aispo/errors.hpp"
#include "aispo/oracles.hpp"
#include "helpers.hpp"

using namespace aispo;

namespace {

struct Enumerated {
  double mean = 0.0;
  double variance = 0.0;
};

Enumerated estimator_moments(const TabularMdp& mdp, const TabularSoftmaxPolicy& pi,
                             const TabularSoftmaxPolicy& tilde, const AlphaSchedule& schedule,
                             int horizon) {
  const ExactSolution sol = solve_policy_exact(mdp, pi.probabilities());
  double m1 = 0.0, m2 = 0.0;
  enumerate_trajectories(mdp, pi.probabilities(), horizon, [&](const Trajectory& traj, double p) {
    const double x =
        l_alpha_per_trajectory(traj, tilde, schedule, exact_advantages(traj, sol), mdp.gamma());
    m1 += p * x;
    m2 += p * x * x;
  });
  return {m1, m2 - m1 * m1};
}

double expected_under(const TabularMdp& mdp, const TabularSoftmaxPolicy& sampler, int horizon,
                      const std::function<double(const Trajectory&)>& f) {
  double total = 0.0;
  enumerate_trajectories(mdp, sampler.probabilities(), horizon,
                         [&](const Trajectory& traj, double p) { total += p * f(traj); });
  return total;
}

}  // namespace

TEST_SUITE("bounds") {
  TEST_CASE("variance bound closed form") {
    const AlphaSchedule s({0.5, 1.0});
    const double gamma = 0.9, c = 1.5, eps = 2.0;
    // |alpha_0|_1 = 1, |alpha_t|_1 = 1.5 afterwards.
    const double sum = std::pow(c, 2.0) + gamma * std::pow(c, 3.0) + gamma * gamma * std::pow(c, 3.0);
    const double expected = (1.0 - gamma * gamma * gamma) / (1.0 - gamma) * eps * eps * sum;
    CHECK(variance_bound(s, c, eps, gamma, 3) == doctest::Approx(expected).epsilon(1e-14));
    CHECK_THROWS_AS(variance_bound(s, 0.5, eps, gamma, 3), ValidationError);
    CHECK_THROWS_AS(variance_bound(s, c, eps, 1.0, 3), ValidationError);
  }

  TEST_CASE("gradient variance bound closed form") {
    const AlphaSchedule s({0.5, 1.0});
    const double expected = 4.0 * 9.0 * 0.25 * 1.2 * (1.0 + 0.8 * 2.25 + 0.64 * 2.25);
    CHECK(grad_variance_bound(3.0, 0.5, 1.2, 2.0, 0.8, s, 3) == doctest::Approx(expected).epsilon(1e-14));
    CHECK_THROWS_AS(grad_variance_bound(0.0, 0.5, 1.2, 2.0, 0.8, s, 3), ValidationError);
  }

  TEST_CASE("integrands at the endpoint schedules") {
    const std::vector<double> lr{0.3, -0.2, 0.5};
    const AlphaSchedule ones = AlphaSchedule::all_ones(3);
    const AlphaSchedule zero({0.0});
    CHECK(bias_integrand(lr, ones, 0.9) == 0.0);
    CHECK(bias_integrand_exponent_alpha(lr, zero, 0.9) == 0.0);
    const double full = std::abs(std::exp(0.3) - 1.0) + 0.9 * std::abs(std::exp(0.1) - 1.0) +
                        0.81 * std::abs(std::exp(0.6) - 1.0);
    CHECK(bias_integrand(lr, zero, 0.9) == doctest::Approx(full));
    CHECK(bias_integrand_exponent_alpha(lr, ones, 0.9) == doctest::Approx(full));
    CHECK(squared_ratio_integrand(std::vector<double>(3, 0.0), zero, 0.5) == doctest::Approx(1.75));
    // All ones: no smoothing gap, distance to ones 0.
    CHECK(grad_bias_integrand(lr, ones, 0.9) == 0.0);
    // Zero schedule: rho_hat = 1, gap (t + 1) |1 - rho_{0:t}|, distance t + 1.
    const double zero_expected = (1.0 + std::abs(1.0 - std::exp(0.3))) +
                                 0.9 * (2.0 + 2.0 * std::abs(1.0 - std::exp(0.1))) +
                                 0.81 * (3.0 + 3.0 * std::abs(1.0 - std::exp(0.6)));
    CHECK(grad_bias_integrand(lr, zero, 0.9) == doctest::Approx(zero_expected));
  }

  TEST_CASE("constants on the chain") {
    const TabularMdp mdp = test::standard_chain();
    const auto pi = test::bernoulli_policy(5, 0.5);
    const auto tilde = test::bernoulli_policy(5, 0.7);
    const BoundConstants c = measure_bound_constants(mdp, pi, tilde);
    CHECK(c.c_rho == doctest::Approx(1.4));
    CHECK(c.c_delta == doctest::Approx(0.5 / 0.3));
    // Softmax score of a two-action row: |e_a - p|_2 = sqrt(2) (1 - p_a).
    CHECK(c.c_score == doctest::Approx(std::sqrt(2.0) * 0.7));
    CHECK(c.c_partial_ratio == doctest::Approx(std::max(0.7 * std::sqrt(2.0) * 0.3, 0.3 * std::sqrt(2.0) * 0.7) / 0.5));
    const ExactSolution sol = solve_policy_exact(mdp, pi.probabilities());
    CHECK(c.epsilon == doctest::Approx(sol.adv.cwiseAbs().maxCoeff()));
    const BoundConstants same = measure_bound_constants(mdp, pi, pi);
    CHECK(same.c_rho == doctest::Approx(1.0));
    CHECK(same.c_delta == doctest::Approx(1.0));
  }

  TEST_CASE("bias and variance bounds hold exactly on enumerated instances") {
    const std::vector<AlphaSchedule> schedules{AlphaSchedule({1.0}), AlphaSchedule({0.5, 1.0}),
                                               AlphaSchedule({0.0}), AlphaSchedule::all_ones(4)};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const TabularMdp mdp = make_random_mdp(2, 2, 0.9, 500 + seed);
      const auto pi = TabularSoftmaxPolicy::from_probabilities(make_random_policy(2, 2, 600 + seed, 0.1));
      const auto tilde =
          TabularSoftmaxPolicy::from_probabilities(make_random_policy(2, 2, 700 + seed, 0.1));
      const BoundConstants c = measure_bound_constants(mdp, pi, tilde);
      const ExactSolution sol = solve_policy_exact(mdp, pi.probabilities());
      const double truth = truncated_discounted_sum(mdp, tilde.probabilities(), sol.adv, 4);
      for (const AlphaSchedule& s : schedules) {
        const Enumerated e = estimator_moments(mdp, pi, tilde, s, 4);
        const double bias_bound_value =
            c.epsilon * expected_under(mdp, tilde, 4, [&](const Trajectory& traj) {
              return bias_integrand(log_ratios_between(traj, tilde, pi), s, 0.9);
            });
        CHECK(std::abs(e.mean - truth) <= bias_bound_value + 1e-12);
        CHECK(e.variance <= variance_bound(s, std::max(c.c_rho, 1.0), c.epsilon, 0.9, 4));
      }
    }
  }

  TEST_CASE("Monte Carlo bias bound estimates carry a standard error") {
    const TabularMdp mdp = test::standard_chain();
    const auto pi = test::bernoulli_policy(5, 0.5);
    const auto tilde = test::bernoulli_policy(5, 0.7);
    const auto trajs = sample_trajectories(mdp, tilde, 20, 1000, 2);
    const BoundEstimate b = bias_bound(trajs, tilde, pi, AlphaSchedule({0.5, 1.0}), 1.0, 0.8);
    CHECK(b.value > 0.0);
    CHECK(b.se > 0.0);
    CHECK(b.se < b.value);
    const BoundEstimate none = bias_bound(trajs, tilde, pi, AlphaSchedule::all_ones(20), 1.0, 0.8);
    CHECK(none.value == 0.0);
    CHECK_THROWS_AS(bias_bound({}, tilde, pi, AlphaSchedule({1.0}), 1.0, 0.8), ValidationError);
  }
}
