#include <doctest.h>

#include <cmath>
#include <vector>

#include "aispo/errors.hpp"
#include "aispo/mdp.hpp"
#include "aispo/oracles.hpp"
#include "helpers.hpp"

using namespace aispo;
using aispo::test::bernoulli_table;
using aispo::test::standard_chain;

namespace {

// Reference values from an independent dense solve of the same chain.
const double kUniformV[5] = {5.6400000000000015, 5.960000000000002, 6.7600000000000025,
                             8.760000000000003, 13.760000000000003};
const double kUniformQ[5][2] = {{5.1168, 6.1632}, {5.6288, 6.2912}, {6.9088, 6.6112},
                                {10.1088, 7.4112}, {18.1088, 9.4112}};
const double kUniformD[5] = {0.6, 0.24, 0.096, 0.0384, 0.0256};
const double kValueDifference[5][2] = {{0.7, 0.03624003993599878},
                                       {0.75, 0.236275200000005},
                                       {0.8, 0.5376559472640059},
                                       {0.85, 0.9550617108480024},
                                       {0.9, 1.5045255659520045}};

}  // namespace

TEST_SUITE("mdp") {
  TEST_CASE("chain rewards fold the slip outcome into the expectation") {
    const TabularMdp mdp = standard_chain();
    for (int s = 0; s < 4; ++s) {
      CHECK(mdp.reward(s, kNChainForward) == doctest::Approx(0.4).epsilon(1e-15));
      CHECK(mdp.reward(s, kNChainBackward) == doctest::Approx(1.6).epsilon(1e-15));
    }
    CHECK(mdp.reward(4, kNChainForward) == doctest::Approx(8.4).epsilon(1e-15));
    CHECK(mdp.reward(4, kNChainBackward) == doctest::Approx(3.6).epsilon(1e-15));
    CHECK(mdp.p(0, kNChainForward, 1) == doctest::Approx(0.8));
    CHECK(mdp.p(0, kNChainForward, 0) == doctest::Approx(0.2));
    CHECK(mdp.p(4, kNChainForward, 4) == doctest::Approx(0.8));
    CHECK(mdp.mu0()[0] == 1.0);
  }

  TEST_CASE("uniform policy on the chain matches the reference solve") {
    const TabularMdp mdp = standard_chain();
    const ExactSolution sol = solve_policy_exact(mdp, bernoulli_table(5, 0.5));
    for (int s = 0; s < 5; ++s) {
      CHECK(std::abs(sol.v[s] - kUniformV[s]) < 1e-12);
      CHECK(std::abs(sol.d_pi[s] - kUniformD[s]) < 1e-12);
      for (int a = 0; a < 2; ++a) {
        CHECK(std::abs(sol.q(s, a) - kUniformQ[s][a]) < 1e-12);
        CHECK(std::abs(sol.adv(s, a) - (kUniformQ[s][a] - kUniformV[s])) < 1e-12);
      }
    }
    CHECK(std::abs(sol.eta - kUniformV[0]) < 1e-12);
    CHECK(std::abs(sol.d_pi.sum() - 1.0) < 1e-12);
  }

  TEST_CASE("value differences on the grid match the reference solve") {
    const TabularMdp mdp = standard_chain();
    for (const auto& [right, expected] : kValueDifference) {
      const double got = value_difference_exact(mdp, bernoulli_table(5, 0.5), bernoulli_table(5, right));
      CHECK(std::abs(got - expected) < 1e-12);
    }
  }

  TEST_CASE("truncated sum approaches the value difference") {
    const TabularMdp mdp = standard_chain();
    const ExactSolution sol = solve_policy_exact(mdp, bernoulli_table(5, 0.5));
    const double truncated = truncated_discounted_sum(mdp, bernoulli_table(5, 0.9), sol.adv, 62);
    CHECK(std::abs(truncated - 1.5045205929413816) < 1e-12);
  }

  TEST_CASE("single-state MDP has V = r / (1 - gamma)") {
    Eigen::MatrixXd r(1, 1);
    r << 1.0;
    Eigen::VectorXd mu(1);
    mu << 1.0;
    const TabularMdp mdp(1, 1, {1.0}, r, 0.8, mu);
    const ExactSolution sol = solve_policy_exact(mdp, PolicyTable::Ones(1, 1));
    CHECK(std::abs(sol.v[0] - 5.0) < 1e-12);
    CHECK(std::abs(sol.eta - 5.0) < 1e-12);
    CHECK(std::abs(sol.adv(0, 0)) < 1e-12);
  }

  TEST_CASE("optimal deterministic chain policy") {
    const TabularMdp mdp = standard_chain();
    PolicyTable best = PolicyTable::Zero(5, 2);
    best(0, kNChainBackward) = 1.0;
    for (int s = 1; s < 5; ++s) best(s, kNChainForward) = 1.0;
    CHECK(std::abs(solve_policy_exact(mdp, best).eta - 9.380233846153857) < 1e-11);
  }

  TEST_CASE("value iteration agrees with the linear solve") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const TabularMdp mdp = make_random_mdp(4, 3, 0.9, seed);
      const PolicyTable pi = make_random_policy(4, 3, seed + 100);
      const Eigen::VectorXd vi = value_iteration(mdp, pi);
      CHECK((vi - solve_policy_exact(mdp, pi).v).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("identities hold on random instances") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const TabularMdp mdp = make_random_mdp(4, 3, 0.9, 1000 + seed);
      const PolicyTable pi = make_random_policy(4, 3, 2000 + seed);
      const PolicyTable tilde = make_random_policy(4, 3, 3000 + seed);
      CHECK(check_performance_difference_identity(mdp, pi, tilde) <= 1e-9);
      CHECK(check_value_dependency_equality(mdp, pi, tilde) <= 1e-9);
      const double direct = value_difference_exact(mdp, pi, tilde);
      CHECK(std::abs(direct - value_difference_via_advantage(mdp, pi, tilde)) <= 1e-9);
      CHECK(std::abs(direct + value_difference_exact(mdp, tilde, pi)) <= 1e-12);
      CHECK(std::abs(value_difference_exact(mdp, pi, pi)) == 0.0);
    }
  }

  TEST_CASE("advantage has zero mean under its own policy") {
    const TabularMdp mdp = make_random_mdp(4, 3, 0.9, 7);
    const PolicyTable pi = make_random_policy(4, 3, 8);
    const ExactSolution sol = solve_policy_exact(mdp, pi);
    for (int s = 0; s < 4; ++s) CHECK(std::abs(pi.row(s).dot(sol.adv.row(s))) < 1e-12);
    CHECK(std::abs(surrogate_exact(mdp, pi, pi)) < 1e-12);
    CHECK(std::abs(sol.eta - mdp.mu0().dot(sol.v)) < 1e-12);
  }

  TEST_CASE("occupancy fault leaves a residual of gamma times the value difference") {
    const TabularMdp mdp = standard_chain();
    const PolicyTable pi = bernoulli_table(5, 0.5);
    for (const auto& [right, delta] : kValueDifference) {
      const PolicyTable tilde = bernoulli_table(5, right);
      const double expected = 0.8 * std::abs(delta);
      CHECK(std::abs(check_value_dependency_equality(mdp, pi, tilde, OracleFault::kOccupancyScale) -
                     expected) < 1e-10);
      CHECK(std::abs(check_performance_difference_identity(mdp, pi, tilde,
                                                           OracleFault::kOccupancyScale) -
                     expected) < 1e-10);
    }
  }

  TEST_CASE("malformed MDPs are rejected with the field named") {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2, 1);
    Eigen::VectorXd mu(2);
    mu << 1.0, 0.0;
    CHECK_THROWS_WITH_AS(TabularMdp(2, 1, {0.5, 0.4, 0.0, 1.0}, r, 0.9, mu),
                         doctest::Contains("transition (s=0, a=0)"), ValidationError);
    CHECK_THROWS_WITH_AS(TabularMdp(2, 1, {1.0, 0.0}, r, 0.9, mu), doctest::Contains("transition"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(TabularMdp(2, 1, {1.0, 0.0, 0.0, 1.0}, r, 1.0, mu),
                         doctest::Contains("gamma"), ValidationError);
    mu << 0.5, 0.6;
    CHECK_THROWS_WITH_AS(TabularMdp(2, 1, {1.0, 0.0, 0.0, 1.0}, r, 0.9, mu),
                         doctest::Contains("mu0"), ValidationError);
    CHECK_THROWS_AS(validate_policy(standard_chain(), PolicyTable::Constant(5, 2, 0.6)),
                    ValidationError);
    CHECK_THROWS_AS(validate_policy(standard_chain(), PolicyTable::Constant(5, 3, 1.0 / 3)),
                    ValidationError);
  }
}
