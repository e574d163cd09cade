#include "aispo/oracles.hpp"

#include <cmath>

#include "aispo/errors.hpp"
#include "aispo/policies.hpp"

namespace aispo {

Eigen::VectorXd value_iteration(const TabularMdp& mdp, const PolicyTable& policy, double tol,
                                int max_iterations) {
  validate_policy(mdp, policy);
  const int n = mdp.n_states();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd next(n);
    for (int s = 0; s < n; ++s) {
      double total = 0.0;
      for (int a = 0; a < mdp.n_actions(); ++a) {
        const double w = policy(s, a);
        if (w == 0.0) continue;
        const auto row = mdp.next_distribution(s, a);
        double expected = 0.0;
        for (int s2 = 0; s2 < n; ++s2) expected += row[s2] * v[s2];
        total += w * (mdp.reward(s, a) + mdp.gamma() * expected);
      }
      next[s] = total;
    }
    const double change = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (change < tol) return v;
  }
  throw InternalError("value iteration did not converge");
}

namespace {

void enumerate_from(const TabularMdp& mdp, const PolicyTable& behavior, int horizon,
                    Trajectory& prefix, int s, double probability,
                    const std::function<void(const Trajectory&, double)>& visit) {
  const int t = prefix.size();
  if (t == horizon) {
    visit(prefix, probability);
    return;
  }
  for (int a = 0; a < mdp.n_actions(); ++a) {
    const double pa = behavior(s, a);
    if (pa <= 0.0) continue;
    for (int s2 = 0; s2 < mdp.n_states(); ++s2) {
      const double ps = mdp.p(s, a, s2);
      if (ps <= 0.0) continue;
      prefix.transitions.push_back({s, a, mdp.reward(s, a), s2, std::log(pa), t});
      enumerate_from(mdp, behavior, horizon, prefix, s2, probability * pa * ps, visit);
      prefix.transitions.pop_back();
    }
  }
}

}  // namespace

void enumerate_trajectories(const TabularMdp& mdp, const PolicyTable& behavior, int horizon,
                            const std::function<void(const Trajectory&, double)>& visit) {
  validate_policy(mdp, behavior);
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  Trajectory prefix;
  prefix.truncated_at = horizon;
  prefix.transitions.reserve(horizon);
  for (int s0 = 0; s0 < mdp.n_states(); ++s0) {
    if (mdp.mu0()[s0] <= 0.0) continue;
    enumerate_from(mdp, behavior, horizon, prefix, s0, mdp.mu0()[s0], visit);
  }
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const double up = f(probe);
    probe[j] = x[j] - h;
    const double down = f(probe);
    probe[j] = x[j];
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

namespace {

PolicyTable softmax_table(const TabularMdp& mdp, const Eigen::VectorXd& logits) {
  TabularSoftmaxPolicy p(mdp.n_states(), mdp.n_actions());
  p.set_parameters(logits);
  return p.probabilities();
}

}  // namespace

Eigen::VectorXd exact_eta_gradient(const TabularMdp& mdp, const Eigen::VectorXd& logits,
                                   double h) {
  return central_difference(
      [&](const Eigen::VectorXd& x) { return solve_policy_exact(mdp, softmax_table(mdp, x)).eta; },
      logits, h);
}

Eigen::VectorXd truncated_objective_gradient(const TabularMdp& mdp, const Eigen::VectorXd& logits,
                                             const Eigen::MatrixXd& f, int horizon, double h) {
  return central_difference(
      [&](const Eigen::VectorXd& x) {
        return truncated_discounted_sum(mdp, softmax_table(mdp, x), f, horizon);
      },
      logits, h);
}

}  // namespace aispo
