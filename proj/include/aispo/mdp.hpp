#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace aispo {

/// Row-stochastic table pi(a|s): one row per state, one column per action.
using PolicyTable = Eigen::MatrixXd;

/// Finite discounted MDP. Transitions are stored flattened row-major as
/// p[(s * n_actions + a) * n_states + s'].
class TabularMdp {
 public:
  /// Validates every invariant; throws ValidationError naming the offending
  /// field.
  TabularMdp(int n_states, int n_actions, std::vector<double> transition,
             Eigen::MatrixXd reward, double gamma, Eigen::VectorXd mu0);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  const Eigen::VectorXd& mu0() const { return mu0_; }
  const Eigen::MatrixXd& reward() const { return reward_; }
  double reward(int s, int a) const { return reward_(s, a); }
  double r_max() const { return reward_.cwiseAbs().maxCoeff(); }

  double p(int s, int a, int next) const {
    return transition_[index(s, a) * static_cast<std::size_t>(n_states_) + next];
  }
  std::span<const double> next_distribution(int s, int a) const {
    return {transition_.data() + index(s, a) * static_cast<std::size_t>(n_states_),
            static_cast<std::size_t>(n_states_)};
  }
  const std::vector<double>& transition_flat() const { return transition_; }

 private:
  std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * n_actions_ + a;
  }

  int n_states_;
  int n_actions_;
  std::vector<double> transition_;
  Eigen::MatrixXd reward_;
  double gamma_;
  Eigen::VectorXd mu0_;
};

/// Exact quantities for one policy. `d_pi` is the normalized discounted
/// occupancy (1-gamma) sum_t gamma^t P(s_t = s).
struct ExactSolution {
  Eigen::VectorXd v;
  Eigen::MatrixXd q;
  Eigen::MatrixXd adv;
  Eigen::VectorXd d_pi;
  double eta = 0.0;
};

/// Throws ValidationError unless `policy` is n_states x n_actions with
/// non-negative rows summing to one within 1e-12.
void validate_policy(const TabularMdp& mdp, const PolicyTable& policy);

/// Dense LU solve of (I - gamma P_pi) V = r_pi and of the transposed resolvent
/// for the occupancy measure.
ExactSolution solve_policy_exact(const TabularMdp& mdp, const PolicyTable& policy);

/// eta(pi_tilde) - eta(pi) from two exact solves.
double value_difference_exact(const TabularMdp& mdp, const PolicyTable& pi,
                              const PolicyTable& pi_tilde);

/// Same difference via (1/(1-gamma)) E_{s~d^pi_tilde, a~pi_tilde} A^pi(s,a).
double value_difference_via_advantage(const TabularMdp& mdp, const PolicyTable& pi,
                                      const PolicyTable& pi_tilde);

/// Surrogate L_pi(pi_tilde) = (1/(1-gamma)) E_{s~d^pi, a~pi_tilde} A^pi(s,a).
double surrogate_exact(const TabularMdp& mdp, const PolicyTable& pi,
                       const PolicyTable& pi_tilde);

/// Deliberate corruption of the oracle used to self-test the check suite.
enum class OracleFault {
  kNone,
  kOccupancyScale,  // d^pi multiplied by (1 - gamma)
};

/// (1/(1-gamma)) E_{s~d^pi} sum_a (pi_tilde - pi)(a|s) (Q^pi_tilde - Q^pi)(s,a):
/// the gap between the true value difference and the surrogate.
double surrogate_correction(const TabularMdp& mdp, const PolicyTable& pi,
                            const PolicyTable& pi_tilde,
                            OracleFault fault = OracleFault::kNone);

/// |eta(pi_tilde) - eta(pi) - L_pi(pi_tilde) - correction|.
double check_performance_difference_identity(const TabularMdp& mdp, const PolicyTable& pi,
                                             const PolicyTable& pi_tilde,
                                             OracleFault fault = OracleFault::kNone);

/// |eta(pi_tilde) - eta(pi) - (1/(1-gamma)) E_{s~d^pi} sum_a (pi_tilde - pi) Q^pi_tilde|.
double check_value_dependency_equality(const TabularMdp& mdp, const PolicyTable& pi,
                                       const PolicyTable& pi_tilde,
                                       OracleFault fault = OracleFault::kNone);

/// Exact E_{tau~policy} sum_{t<horizon} gamma^t f(s_t, a_t) by propagating the
/// state distribution forward. With f = A^pi and policy = pi_tilde this is the
/// truncated value difference targeted by horizon-limited estimators.
double truncated_discounted_sum(const TabularMdp& mdp, const PolicyTable& policy,
                                const Eigen::MatrixXd& f, int horizon);

/// Random instance for property tests: Dirichlet(1) transition rows and
/// initial distribution, rewards uniform on [-1, 1].
TabularMdp make_random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed);

/// Random policy with every probability at least `floor` (so ratios exist).
PolicyTable make_random_policy(int n_states, int n_actions, std::uint64_t seed,
                               double floor = 0.05);

}  // namespace aispo
