#pragma once

#include <Eigen/Dense>

#include <functional>

#include "aispo/envs.hpp"
#include "aispo/mdp.hpp"

namespace aispo {

/// Iterative policy evaluation V <- r_pi + gamma P_pi V until the sup-norm
/// change drops below `tol`. Independent of the LU path in solve_policy_exact.
Eigen::VectorXd value_iteration(const TabularMdp& mdp, const PolicyTable& policy,
                                double tol = 1e-13, int max_iterations = 100000);

/// Calls visit(trajectory, probability) for every length-`horizon` trajectory
/// with nonzero probability under `behavior`. behavior_log_prob is filled
/// from `behavior`.
void enumerate_trajectories(const TabularMdp& mdp, const PolicyTable& behavior, int horizon,
                            const std::function<void(const Trajectory&, double)>& visit);

/// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h.
Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5);

/// |a - b|_2 / max(|a|_2, |b|_2, floor)
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8);

/// Gradient of eta(softmax(logits)) with respect to the flat logits, by
/// central differences of exact solves.
Eigen::VectorXd exact_eta_gradient(const TabularMdp& mdp, const Eigen::VectorXd& logits,
                                   double h = 1e-5);

/// Gradient of sum_{t<horizon} gamma^t E_{softmax(logits)} f(s_t, a_t) with
/// respect to the flat logits, by central differences of the exact forward
/// propagation.
Eigen::VectorXd truncated_objective_gradient(const TabularMdp& mdp, const Eigen::VectorXd& logits,
                                             const Eigen::MatrixXd& f, int horizon,
                                             double h = 1e-5);

}  // namespace aispo
