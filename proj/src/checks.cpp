#include <cmath>
#include <functional>
#include <limits>

#include "aispo/bounds.hpp"
#include "aispo/envs.hpp"
#include "aispo/errors.hpp"
#include "aispo/format.hpp"
#include "aispo/estimators.hpp"
#include "aispo/harness.hpp"
#include "aispo/optimizer.hpp"
#include "aispo/oracles.hpp"
#include "aispo/parallel.hpp"
#include "aispo/policies.hpp"
#include "aispo/rng.hpp"

namespace aispo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Batch tags that keep the trajectory streams of different checks apart.
constexpr std::uint64_t kIsBatch = 1000;
constexpr std::uint64_t kBoundBehaviorBatch = 2000;
constexpr std::uint64_t kBoundTargetBatch = 2001;
constexpr std::uint64_t kConsistencyBatch = 3000;
// Key tags for seeded random instances.
constexpr std::uint64_t kIdentityTag = 0x1D;
constexpr std::uint64_t kEnumerationTag = 0xE7;
constexpr std::uint64_t kGradientTag = 0x9D;

std::string fmt(double x) { return format_real(x); }

std::string schedule_label(const std::vector<double>& suffix) {
  std::string out;
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    if (i) out += '_';
    out += fmt(suffix[i]);
  }
  return out;
}

TabularSoftmaxPolicy bernoulli(int n_states, double right) {
  Eigen::Vector2d p;
  p[kNChainForward] = right;
  p[kNChainBackward] = 1.0 - right;
  return TabularSoftmaxPolicy::state_independent(n_states, p);
}

/// fn(k, trajectory) for N trajectories of the stream (seed, kTrajectory, k, batch),
/// without keeping them.
template <class Fn>
void for_each_trajectory(const TabularMdp& mdp, const TabularSoftmaxPolicy& policy, int horizon,
                         std::size_t n, std::uint64_t seed, std::uint64_t batch, int threads,
                         Fn&& fn) {
  parallel_for(n, threads, [&](std::size_t k) {
    CounterRng rng(seed, Stream::kTrajectory, k, batch);
    fn(k, sample_trajectory(mdp, policy, horizon, rng));
  });
}

// Central fourth moment based standard error of the sample variance.
double variance_se(std::span<const double> v, double mean) {
  const double n = static_cast<double>(v.size());
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : v) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  return std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
}

struct VectorStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd se;
  double trace_cov = 0.0;  // sum of per-coordinate sample variances
  double trace_cov_se = 0.0;
};

VectorStats vector_stats(const std::vector<Eigen::VectorXd>& samples) {
  const double n = static_cast<double>(samples.size());
  VectorStats st;
  st.mean = Eigen::VectorXd::Zero(samples.front().size());
  for (const auto& g : samples) st.mean += g;
  st.mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(st.mean.size());
  std::vector<double> sq(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Eigen::VectorXd d = samples[k] - st.mean;
    var += d.cwiseProduct(d);
    sq[k] = d.squaredNorm();
  }
  var /= (n - 1.0);
  st.se = (var / n).cwiseSqrt();
  st.trace_cov = var.sum();
  st.trace_cov_se = summarize(sq).se;
  return st;
}

struct Group {
  std::vector<std::string> names;
  std::function<std::vector<CheckRow>(CheckReport&)> run;
};

struct NChainCase {
  TabularMdp mdp;
  TabularSoftmaxPolicy pi;
  ExactSolution pi_solution;
};

NChainCase nchain_case(const CheckConfig& c) {
  TabularMdp mdp = nchain_new(c.nchain_states, c.slip, c.gamma);
  TabularSoftmaxPolicy pi = bernoulli(mdp.n_states(), c.pi_right);
  ExactSolution sol = solve_policy_exact(mdp, pi.probabilities());
  return {std::move(mdp), std::move(pi), std::move(sol)};
}

struct RandomInstance {
  TabularMdp mdp;
  PolicyTable pi;
  PolicyTable tilde;
};

RandomInstance random_instance(std::uint64_t seed, std::uint64_t tag, int index, int states,
                               int actions, double gamma) {
  const std::uint64_t i = static_cast<std::uint64_t>(index);
  return {make_random_mdp(states, actions, gamma, derive_key(seed, {tag, i, 0})),
          make_random_policy(states, actions, derive_key(seed, {tag, i, 1})),
          make_random_policy(states, actions, derive_key(seed, {tag, i, 2}))};
}

// ---------------------------------------------------------------- identities

void add_identity_groups(const CheckConfig& c, int threads, std::vector<Group>& groups) {
  const double tol = c.identity_tolerance;
  for (double right : c.pi_tilde_right_grid) {
    const std::string label = "pi_tilde=" + fmt(right);
    groups.push_back({{"performance_difference_identity/nchain/" + label,
                       "value_dependency_equality/nchain/" + label},
                      [&c, right, tol, label](CheckReport&) {
                        const NChainCase nc = nchain_case(c);
                        const PolicyTable p = nc.pi.probabilities();
                        const PolicyTable q = bernoulli(nc.mdp.n_states(), right).probabilities();
                        return std::vector<CheckRow>{
                            {"performance_difference_identity/nchain/" + label,
                             check_performance_difference_identity(nc.mdp, p, q, c.fault), 0.0, tol},
                            {"value_dependency_equality/nchain/" + label,
                             check_value_dependency_equality(nc.mdp, p, q, c.fault), 0.0, tol}};
                      }});
  }

  groups.push_back(
      {{"performance_difference_identity/random", "value_dependency_equality/random",
        "value_difference_two_paths/random", "swap_antisymmetry/random"},
       [&c, tol, threads](CheckReport&) {
         const std::size_t n = static_cast<std::size_t>(c.random_instances);
         std::vector<Eigen::Vector4d> residuals(n);
         parallel_for(n, threads, [&](std::size_t i) {
           const RandomInstance r = random_instance(c.seed, kIdentityTag, static_cast<int>(i),
                                                    c.random_states, c.random_actions, c.random_gamma);
           const double forward = value_difference_exact(r.mdp, r.pi, r.tilde);
           residuals[i] = Eigen::Vector4d(
               check_performance_difference_identity(r.mdp, r.pi, r.tilde, c.fault),
               check_value_dependency_equality(r.mdp, r.pi, r.tilde, c.fault),
               std::abs(forward - value_difference_via_advantage(r.mdp, r.pi, r.tilde)),
               std::abs(forward + value_difference_exact(r.mdp, r.tilde, r.pi)));
         });
         Eigen::Vector4d worst = Eigen::Vector4d::Zero();
         for (const auto& r : residuals) worst = worst.cwiseMax(r);
         return std::vector<CheckRow>{{"performance_difference_identity/random", worst[0], 0.0, tol},
                                      {"value_dependency_equality/random", worst[1], 0.0, tol},
                                      {"value_difference_two_paths/random", worst[2], 0.0, tol},
                                      {"swap_antisymmetry/random", worst[3], 0.0, tol}};
       }});

  groups.push_back({{"value_difference_two_paths/nchain", "value_iteration_agreement/nchain"},
                    [&c, tol](CheckReport&) {
                      const NChainCase nc = nchain_case(c);
                      const PolicyTable p = nc.pi.probabilities();
                      double two_paths = 0.0;
                      double vi = (value_iteration(nc.mdp, p) - nc.pi_solution.v).cwiseAbs().maxCoeff();
                      for (double right : c.pi_tilde_right_grid) {
                        const PolicyTable q = bernoulli(nc.mdp.n_states(), right).probabilities();
                        two_paths = std::max(two_paths, std::abs(value_difference_exact(nc.mdp, p, q) -
                                                                 value_difference_via_advantage(nc.mdp, p, q)));
                        vi = std::max(vi, (value_iteration(nc.mdp, q) - solve_policy_exact(nc.mdp, q).v)
                                              .cwiseAbs()
                                              .maxCoeff());
                      }
                      return std::vector<CheckRow>{
                          {"value_difference_two_paths/nchain", two_paths, 0.0, tol},
                          {"value_iteration_agreement/nchain", vi, 0.0, c.value_iteration_tolerance}};
                    }});
}

// ---------------------------------------------------------------- IS unbiasedness

void add_is_groups(const CheckConfig& c, int threads, std::vector<Group>& groups) {
  for (std::size_t g = 0; g < c.pi_tilde_right_grid.size(); ++g) {
    const double right = c.pi_tilde_right_grid[g];
    const std::string name = "is_unbiasedness/nchain/pi_tilde=" + fmt(right);
    groups.push_back({{name}, [&c, threads, g, right, name](CheckReport& report) {
                        const NChainCase nc = nchain_case(c);
                        const TabularSoftmaxPolicy tilde = bernoulli(nc.mdp.n_states(), right);
                        const AlphaSchedule is = AlphaSchedule::all_ones(c.horizon);
                        const double truth = value_difference_exact(nc.mdp, nc.pi.probabilities(),
                                                                    tilde.probabilities());
                        std::vector<double> est(static_cast<std::size_t>(c.is_trajectories));
                        for_each_trajectory(nc.mdp, nc.pi, c.horizon, est.size(), c.seed, kIsBatch + g,
                                            threads, [&](std::size_t k, const Trajectory& tr) {
                                              est[k] = l_alpha_from_log_ratios(
                                                  log_ratios(tr, tilde),
                                                  exact_advantages(tr, nc.pi_solution), is, nc.mdp.gamma());
                                            });
                        const SampleStats st = summarize(est);
                        report.estimators.push_back({"importance_sampling/pi_tilde=" + fmt(right),
                                                     "all_ones", st.n, c.horizon, st.mean, st.std,
                                                     st.mean - truth, 0.0});
                        return std::vector<CheckRow>{{name, std::abs(st.mean - truth), 0.0, c.sigma * st.se}};
                      }});
  }
}

// ---------------------------------------------------------------- bounds, Monte Carlo

void add_mc_bound_groups(const CheckConfig& c, int threads, std::vector<Group>& groups) {
  for (const std::vector<double>& suffix : c.bound_schedules) {
    const std::string label = "/nchain/schedule=" + schedule_label(suffix);
    groups.push_back(
        {{"variance_bound" + label, "bias_bound" + label, "grad_variance_bound" + label,
          "grad_bias_bound" + label},
         [&c, threads, suffix, label](CheckReport& report) {
           const NChainCase nc = nchain_case(c);
           const TabularSoftmaxPolicy tilde = bernoulli(nc.mdp.n_states(), c.bound_pi_tilde_right);
           const AlphaSchedule schedule(suffix);
           const BoundConstants k = measure_bound_constants(nc.mdp, nc.pi, tilde);
           const double gamma = nc.mdp.gamma();
           const std::size_t n = static_cast<std::size_t>(c.bound_trajectories);

           std::vector<double> estimate(n), squared(n), grad_bias_int(n);
           std::vector<Eigen::VectorXd> grads(n);
           for_each_trajectory(nc.mdp, nc.pi, c.horizon, n, c.seed, kBoundBehaviorBatch, threads,
                               [&](std::size_t i, const Trajectory& tr) {
                                 const std::vector<double> lr = log_ratios(tr, tilde);
                                 const std::vector<double> adv = exact_advantages(tr, nc.pi_solution);
                                 estimate[i] = l_alpha_from_log_ratios(lr, adv, schedule, gamma);
                                 squared[i] = squared_ratio_integrand(lr, schedule, gamma);
                                 grad_bias_int[i] = grad_bias_integrand(lr, schedule, gamma);
                                 grads[i] = l_alpha_gradient(tr, tilde, schedule, adv, gamma);
                               });
           std::vector<double> bias_int(n), bias_int_alpha(n);
           for_each_trajectory(nc.mdp, tilde, c.horizon, n, c.seed, kBoundTargetBatch, threads,
                               [&](std::size_t i, const Trajectory& tr) {
                                 const std::vector<double> lr = log_ratios_between(tr, tilde, nc.pi);
                                 bias_int[i] = bias_integrand(lr, schedule, gamma);
                                 bias_int_alpha[i] = bias_integrand_exponent_alpha(lr, schedule, gamma);
                               });

           const SampleStats est = summarize(estimate);
           const double var_se = variance_se(estimate, est.mean);
           const double var_bound = variance_bound(schedule, k.c_rho, k.epsilon, gamma, c.horizon);

           const double truncated_truth = truncated_discounted_sum(
               nc.mdp, tilde.probabilities(), nc.pi_solution.adv, c.horizon);
           const SampleStats bias_st = summarize(bias_int);
           const SampleStats bias_alpha_st = summarize(bias_int_alpha);
           const double bias_bound_value = k.epsilon * bias_st.mean;

           const SampleStats sq = summarize(squared);
           const double c_gamma = sq.mean + c.sigma * sq.se;
           const VectorStats g = vector_stats(grads);
           const double gvar_bound = grad_variance_bound(k.c_partial_ratio, k.c_delta, c_gamma,
                                                         k.epsilon, gamma, schedule, c.horizon);

           const Eigen::VectorXd target = truncated_objective_gradient(
               nc.mdp, tilde.parameters(), nc.pi_solution.adv, c.horizon, c.fd_step);
           const SampleStats gb = summarize(grad_bias_int);

           const double exact_truth =
               value_difference_exact(nc.mdp, nc.pi.probabilities(), tilde.probabilities());
           report.estimators.push_back({"l_alpha/pi_tilde=" + fmt(c.bound_pi_tilde_right),
                                        schedule.to_string(), est.n, c.horizon, est.mean, est.std,
                                        est.mean - exact_truth, bias_bound_value});
           report.estimators.push_back(
               {"l_alpha_bias_bound_exponent_alpha/pi_tilde=" + fmt(c.bound_pi_tilde_right),
                schedule.to_string(), est.n, c.horizon, est.mean, est.std, est.mean - exact_truth,
                k.epsilon * bias_alpha_st.mean});

           return std::vector<CheckRow>{
               {"variance_bound" + label, est.std * est.std, var_bound, c.sigma * var_se},
               {"bias_bound" + label, std::abs(est.mean - truncated_truth), bias_bound_value,
                c.sigma * (est.se + k.epsilon * bias_st.se)},
               {"grad_variance_bound" + label, g.trace_cov, gvar_bound, c.sigma * g.trace_cov_se},
               {"grad_bias_bound" + label, (g.mean - target).norm(), k.epsilon * k.c_score * gb.mean,
                c.sigma * (g.se.norm() + k.epsilon * k.c_score * gb.se)}};
         }});
  }
}

// ---------------------------------------------------------------- bounds, enumeration

struct EnumerationResult {
  Eigen::Vector4d measured;
  Eigen::Vector4d bound;
};

EnumerationResult enumerate_bounds(const RandomInstance& r, const AlphaSchedule& schedule,
                                   int horizon, double fd_step) {
  const TabularMdp& mdp = r.mdp;
  const double gamma = mdp.gamma();
  const TabularSoftmaxPolicy pi = TabularSoftmaxPolicy::from_probabilities(r.pi);
  const TabularSoftmaxPolicy tilde = TabularSoftmaxPolicy::from_probabilities(r.tilde);
  const ExactSolution sol = solve_policy_exact(mdp, r.pi);
  const BoundConstants k = measure_bound_constants(mdp, pi, tilde);

  double mean = 0.0, second = 0.0, squared = 0.0, grad_bias_int = 0.0, grad_second = 0.0;
  Eigen::VectorXd grad_mean = Eigen::VectorXd::Zero(tilde.n_params());
  enumerate_trajectories(mdp, r.pi, horizon, [&](const Trajectory& tr, double p) {
    const std::vector<double> lr = log_ratios(tr, tilde);
    const std::vector<double> adv = exact_advantages(tr, sol);
    const double l = l_alpha_from_log_ratios(lr, adv, schedule, gamma);
    const Eigen::VectorXd g = l_alpha_gradient(tr, tilde, schedule, adv, gamma);
    mean += p * l;
    second += p * l * l;
    squared += p * squared_ratio_integrand(lr, schedule, gamma);
    grad_bias_int += p * grad_bias_integrand(lr, schedule, gamma);
    grad_mean += p * g;
    grad_second += p * g.squaredNorm();
  });
  double bias_int = 0.0;
  enumerate_trajectories(mdp, r.tilde, horizon, [&](const Trajectory& tr, double p) {
    bias_int += p * bias_integrand(log_ratios_between(tr, tilde, pi), schedule, gamma);
  });

  const double truncated_truth = truncated_discounted_sum(mdp, r.tilde, sol.adv, horizon);
  const Eigen::VectorXd target =
      truncated_objective_gradient(mdp, tilde.parameters(), sol.adv, horizon, fd_step);
  EnumerationResult out;
  out.measured = Eigen::Vector4d(std::max(0.0, second - mean * mean), std::abs(mean - truncated_truth),
                                 std::max(0.0, grad_second - grad_mean.squaredNorm()),
                                 (grad_mean - target).norm());
  out.bound = Eigen::Vector4d(
      variance_bound(schedule, k.c_rho, k.epsilon, gamma, horizon), k.epsilon * bias_int,
      grad_variance_bound(k.c_partial_ratio, k.c_delta, squared, k.epsilon, gamma, schedule, horizon),
      k.epsilon * k.c_score * grad_bias_int);
  return out;
}

void add_enumeration_groups(const CheckConfig& c, int threads, std::vector<Group>& groups) {
  static const char* kKinds[4] = {"variance_bound", "bias_bound", "grad_variance_bound",
                                  "grad_bias_bound"};
  for (const std::vector<double>& suffix : c.bound_schedules) {
    const std::string label = "/enumeration/schedule=" + schedule_label(suffix);
    std::vector<std::string> names;
    for (const char* kind : kKinds) names.push_back(kind + label);
    groups.push_back({names, [&c, threads, suffix, names](CheckReport&) {
                        const AlphaSchedule schedule(suffix);
                        const std::size_t n = static_cast<std::size_t>(c.enumeration_instances);
                        std::vector<EnumerationResult> results(n);
                        parallel_for(n, threads, [&](std::size_t i) {
                          const RandomInstance r = random_instance(c.seed, kEnumerationTag,
                                                                   static_cast<int>(i), 2, 2,
                                                                   c.enumeration_gamma);
                          results[i] = enumerate_bounds(r, schedule, c.enumeration_horizon, c.fd_step);
                        });
                        std::vector<CheckRow> rows;
                        for (int kind = 0; kind < 4; ++kind) {
                          // Report the instance closest to violating the bound.
                          std::size_t worst = 0;
                          for (std::size_t i = 1; i < n; ++i) {
                            if (results[i].bound[kind] - results[i].measured[kind] <
                                results[worst].bound[kind] - results[worst].measured[kind]) {
                              worst = i;
                            }
                          }
                          rows.push_back({names[kind], results[worst].measured[kind],
                                          results[worst].bound[kind], 0.0});
                        }
                        return rows;
                      }});
  }
}

// ---------------------------------------------------------------- gradients

const char* target_name(GradientTarget t) {
  switch (t) {
    case GradientTarget::kLogProb: return "grad_log_prob";
    case GradientTarget::kTerm: return "grad_f_alpha";
    case GradientTarget::kMinibatchUnclipped: return "minibatch_unclipped";
    case GradientTarget::kMinibatchClipped: return "minibatch_clipped";
  }
  return "";
}

constexpr GradientTarget kAllTargets[4] = {GradientTarget::kLogProb, GradientTarget::kTerm,
                                           GradientTarget::kMinibatchUnclipped,
                                           GradientTarget::kMinibatchClipped};

void add_gradient_groups(const CheckConfig& c, std::vector<Group>& groups) {
  for (int cls = 0; cls < 2; ++cls) {
    for (GradientTarget target : kAllTargets) {
      const std::string name = std::string("gradient_fd/") + (cls == 0 ? "tabular/" : "gaussian_mlp/") +
                               target_name(target);
      groups.push_back({{name}, [&c, cls, target, name](CheckReport&) {
                          const GradientCheckResult r =
                              cls == 0 ? check_tabular_gradients(target, c.gradient_points, c.seed, c.fd_step)
                                       : check_gaussian_gradients(target, c.gradient_points, c.seed, c.fd_step);
                          double measured = r.max_relative_error;
                          // A clipped check that never exercised the clamp proves nothing.
                          if (target == GradientTarget::kMinibatchClipped && r.points_with_active_clip == 0) {
                            measured = kInf;
                          }
                          return std::vector<CheckRow>{{name, measured, 0.0, c.fd_tolerance}};
                        }});
    }
  }
}

// ---------------------------------------------------------------- consistency

void add_consistency_groups(const CheckConfig& c, int threads, std::vector<Group>& groups) {
  for (const std::vector<double>& suffix : c.consistency_schedules) {
    const std::string name = "policy_gradient_consistency/nchain/schedule=" + schedule_label(suffix);
    groups.push_back({{name}, [&c, threads, suffix, name](CheckReport&) {
                        const NChainCase nc = nchain_case(c);
                        const AlphaSchedule schedule(suffix);
                        const double gamma = nc.mdp.gamma();
                        Batch<Trajectory> batch;
                        batch.trajectories = sample_trajectories(
                            nc.mdp, nc.pi, c.horizon, static_cast<std::size_t>(c.gradient_trajectories),
                            c.seed, threads, Stream::kTrajectory, kConsistencyBatch);
                        batch.advantages = exact_advantages(batch.trajectories, nc.pi_solution);
                        const std::vector<TimestepRef> refs = batch.all_timesteps();
                        ObjectiveSpec spec;
                        spec.schedule = schedule;
                        spec.gamma = gamma;
                        spec.discount_weighting = true;
                        // Mean over all N*T timesteps times T is the per-trajectory mean of
                        // sum_t gamma^t grad f_t.
                        const Eigen::VectorXd full =
                            static_cast<double>(c.horizon) * grad_objective_minibatch(batch, nc.pi, refs, spec);

                        std::vector<Eigen::VectorXd> per_traj(batch.trajectories.size());
                        parallel_for(per_traj.size(), threads, [&](std::size_t k) {
                          per_traj[k] = l_alpha_gradient(batch.trajectories[k], nc.pi, schedule,
                                                         batch.advantages[k], gamma);
                        });
                        const VectorStats st = vector_stats(per_traj);
                        const Eigen::VectorXd exact = exact_eta_gradient(nc.mdp, nc.pi.parameters(), c.fd_step);
                        double worst = 0.0;
                        for (Eigen::Index j = 0; j < exact.size(); ++j) {
                          const double diff = std::abs(full[j] - exact[j]);
                          const double z = st.se[j] > 0.0 ? diff / st.se[j] : (diff > 1e-9 ? kInf : 0.0);
                          worst = std::max(worst, z);
                        }
                        return std::vector<CheckRow>{{name, worst, c.sigma, 0.0}};
                      }});
  }
}

std::vector<Group> build_groups(const CheckConfig& c, int threads) {
  std::vector<Group> groups;
  add_identity_groups(c, threads, groups);
  add_is_groups(c, threads, groups);
  add_mc_bound_groups(c, threads, groups);
  add_enumeration_groups(c, threads, groups);
  add_gradient_groups(c, groups);
  add_consistency_groups(c, threads, groups);
  return groups;
}

// ---------------------------------------------------------------- gradient point generators

struct TabularPoint {
  TabularSoftmaxPolicy tilde{1, 1};
  Batch<Trajectory> batch;
};

struct GaussianPoint {
  GaussianMlpPolicy tilde{1, 1, 0};
  Batch<ContinuousTrajectory> batch;
};

constexpr int kPointTrajectories = 3;
constexpr int kPointLength = 6;
constexpr int kPointRefs = 6;
constexpr double kPointOmega = 0.2;
constexpr double kKinkDistance = 1e-3;

AlphaSchedule random_schedule(CounterRng& rng) {
  std::vector<double> suffix(1 + rng.below(4));
  for (double& w : suffix) w = rng.uniform();
  return AlphaSchedule(suffix);
}

TabularPoint tabular_point(CounterRng& rng) {
  constexpr int S = 3;
  constexpr int A = 2;
  const TabularMdp mdp = make_random_mdp(S, A, 0.9, rng());
  Eigen::MatrixXd logits(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) logits(s, a) = rng.normal();
  }
  const TabularSoftmaxPolicy pi = TabularSoftmaxPolicy::from_logits(logits);
  TabularPoint p;
  p.tilde = pi;
  Eigen::VectorXd theta = pi.parameters();
  for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] += 0.3 * rng.normal();
  p.tilde.set_parameters(theta);
  for (int k = 0; k < kPointTrajectories; ++k) {
    p.batch.trajectories.push_back(sample_trajectory(mdp, pi, kPointLength, rng));
    std::vector<double> adv(kPointLength);
    for (double& x : adv) x = rng.normal();
    p.batch.advantages.push_back(std::move(adv));
  }
  return p;
}

GaussianPoint gaussian_point(CounterRng& rng) {
  constexpr int kState = PointMassEnv::kStateDim;
  constexpr int kAction = PointMassEnv::kActionDim;
  const GaussianMlpPolicy pi(kState, kAction, rng());
  GaussianPoint p;
  p.tilde = pi;
  Eigen::VectorXd theta = pi.parameters();
  for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] += 0.1 * rng.normal();
  p.tilde.set_parameters(theta);
  for (int k = 0; k < kPointTrajectories; ++k) {
    ContinuousTrajectory tr;
    tr.truncated_at = kPointLength;
    Eigen::VectorXd s(kState);
    for (int d = 0; d < kState; ++d) s[d] = rng.normal();
    for (int t = 0; t < kPointLength; ++t) {
      Eigen::VectorXd next(kState);
      for (int d = 0; d < kState; ++d) next[d] = rng.normal();
      const Eigen::VectorXd a = pi.sample(s, rng);
      tr.transitions.push_back({s, a, 0.0, next, pi.log_prob(s, a), t});
      s = next;
    }
    p.batch.trajectories.push_back(std::move(tr));
    std::vector<double> adv(kPointLength);
    for (double& x : adv) x = rng.normal();
    p.batch.advantages.push_back(std::move(adv));
  }
  return p;
}

template <class Point, class MakePoint>
GradientCheckResult run_gradient_check(GradientTarget target, int points, std::uint64_t seed,
                                       double fd_step, std::uint64_t class_tag, MakePoint&& make_point) {
  using Policy = decltype(Point::tilde);
  if (points < 1) throw ValidationError("gradient check needs at least one point");
  GradientCheckResult result;
  for (int p = 0; p < points; ++p) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt > 1000) throw InternalError("could not draw a gradient check point away from the clip edges");
      CounterRng rng(derive_key(seed, {kGradientTag, class_tag, static_cast<std::uint64_t>(target),
                                       static_cast<std::uint64_t>(p), attempt}));
      Point point = make_point(rng);
      const AlphaSchedule schedule = random_schedule(rng);
      std::vector<TimestepRef> refs(kPointRefs);
      for (TimestepRef& r : refs) {
        r.trajectory = static_cast<int>(rng.below(kPointTrajectories));
        r.t = static_cast<int>(rng.below(kPointLength));
      }
      const TimestepRef& one = refs.front();
      const auto& traj = point.batch.trajectories[one.trajectory];
      const auto& step = traj[one.t];

      ObjectiveSpec spec;
      spec.schedule = schedule;
      spec.gamma = 0.9;
      spec.discount_weighting = true;
      if (target == GradientTarget::kMinibatchClipped) {
        spec.omega = kPointOmega;
        bool near_kink = false;
        bool any_clipped = false;
        bool any_free = false;
        for (const TimestepRef& r : refs) {
          const TermInfo info = accumulate_term(point.batch.trajectories[r.trajectory], point.tilde,
                                                schedule, point.batch.advantages[r.trajectory][r.t],
                                                r.t, kPointOmega, 0.0, nullptr);
          near_kink = near_kink || std::abs(info.ratio - (1.0 - kPointOmega)) < kKinkDistance ||
                      std::abs(info.ratio - (1.0 + kPointOmega)) < kKinkDistance;
          any_clipped = any_clipped || info.clipped;
          any_free = any_free || !info.clipped;
        }
        if (near_kink || !any_free) {
          ++result.skipped_near_kink;
          continue;
        }
        if (any_clipped) ++result.points_with_active_clip;
      }

      std::function<double(const Eigen::VectorXd&)> f;
      Eigen::VectorXd analytic;
      Policy probe = point.tilde;
      switch (target) {
        case GradientTarget::kLogProb:
          analytic = point.tilde.grad_log_prob(step.state, step.action);
          f = [&](const Eigen::VectorXd& x) {
            probe.set_parameters(x);
            return probe.log_prob(step.state, step.action);
          };
          break;
        case GradientTarget::kTerm:
          analytic = grad_f_alpha(traj, point.tilde, schedule, point.batch.advantages[one.trajectory], one.t);
          f = [&](const Eigen::VectorXd& x) {
            probe.set_parameters(x);
            return smoothed_ratio_product(traj, probe, schedule, one.t) *
                   point.batch.advantages[one.trajectory][one.t];
          };
          break;
        case GradientTarget::kMinibatchUnclipped:
        case GradientTarget::kMinibatchClipped:
          analytic = grad_objective_minibatch(point.batch, point.tilde, refs, spec);
          f = [&](const Eigen::VectorXd& x) {
            probe.set_parameters(x);
            return evaluate_objective(point.batch, probe, refs, spec).objective;
          };
          break;
      }
      const Eigen::VectorXd numeric = central_difference(f, point.tilde.parameters(), fd_step);
      result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic, numeric));
      ++result.points;
      break;
    }
  }
  return result;
}

}  // namespace

GradientCheckResult check_tabular_gradients(GradientTarget target, int points, std::uint64_t seed,
                                            double fd_step) {
  return run_gradient_check<TabularPoint>(target, points, seed, fd_step, 0, tabular_point);
}

GradientCheckResult check_gaussian_gradients(GradientTarget target, int points, std::uint64_t seed,
                                             double fd_step) {
  return run_gradient_check<GaussianPoint>(target, points, seed, fd_step, 1, gaussian_point);
}

void validate_check_config(const CheckConfig& c) {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
  };
  auto interior = [](double p) { return p > 0.0 && p < 1.0; };
  require(c.sigma > 0.0, "field 'sigma' must be positive");
  require(c.nchain_states >= 2, "field 'nchain_states' must be at least 2");
  require(c.slip >= 0.0 && c.slip <= 1.0, "field 'slip' must lie in [0, 1]");
  require(interior(c.gamma), "field 'gamma' must lie in (0, 1)");
  require(c.horizon > 0, "field 'horizon' must be positive");
  require(interior(c.pi_right), "field 'pi_right' must lie in (0, 1)");
  require(!c.pi_tilde_right_grid.empty(), "field 'pi_tilde_right_grid' must not be empty");
  for (double p : c.pi_tilde_right_grid) {
    require(interior(p), "field 'pi_tilde_right_grid' entries must lie in (0, 1)");
  }
  require(c.random_instances > 0, "field 'random_instances' must be positive");
  require(c.random_states > 0, "field 'random_states' must be positive");
  require(c.random_actions > 0, "field 'random_actions' must be positive");
  require(interior(c.random_gamma), "field 'random_gamma' must lie in (0, 1)");
  require(c.identity_tolerance >= 0.0, "field 'identity_tolerance' must be non-negative");
  require(c.value_iteration_tolerance >= 0.0, "field 'value_iteration_tolerance' must be non-negative");
  require(c.is_trajectories > 1, "field 'is_trajectories' must be at least 2");
  require(c.bound_trajectories > 1, "field 'bound_trajectories' must be at least 2");
  require(c.gradient_trajectories > 1, "field 'gradient_trajectories' must be at least 2");
  require(interior(c.bound_pi_tilde_right), "field 'bound_pi_tilde_right' must lie in (0, 1)");
  auto check_schedules = [&](const std::vector<std::vector<double>>& list, const char* field,
                             bool end_in_one) {
    for (const auto& s : list) {
      require(!s.empty(), std::string("field '") + field + "' entries must not be empty");
      for (double w : s) {
        require(w >= 0.0 && w <= 1.0, std::string("field '") + field + "' weights must lie in [0, 1]");
      }
      require(!end_in_one || s.back() == 1.0,
              std::string("field '") + field + "' schedules must end in 1");
    }
  };
  check_schedules(c.bound_schedules, "bound_schedules", false);
  check_schedules(c.consistency_schedules, "consistency_schedules", true);
  require(c.enumeration_instances > 0, "field 'enumeration_instances' must be positive");
  require(c.enumeration_horizon >= 1 && c.enumeration_horizon <= 8,
          "field 'enumeration_horizon' must lie in [1, 8]");
  require(interior(c.enumeration_gamma), "field 'enumeration_gamma' must lie in (0, 1)");
  require(c.gradient_points > 0, "field 'gradient_points' must be positive");
  require(c.fd_step > 0.0, "field 'fd_step' must be positive");
  require(c.fd_tolerance >= 0.0, "field 'fd_tolerance' must be non-negative");
}

bool CheckReport::all_passed() const {
  for (const CheckRow& r : rows) {
    if (!r.passed()) return false;
  }
  return true;
}

std::vector<std::string> registered_checks(const CheckConfig& config) {
  validate_check_config(config);
  std::vector<std::string> names;
  for (const Group& g : build_groups(config, 1)) names.insert(names.end(), g.names.begin(), g.names.end());
  return names;
}

CheckReport theory_check_suite(const CheckConfig& config, int threads) {
  validate_check_config(config);
  CheckReport report;
  for (const Group& g : build_groups(config, threads)) {
    std::vector<CheckRow> rows = g.run(report);
    if (rows.size() != g.names.size()) throw InternalError("check group returned the wrong number of rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].check_name != g.names[i]) throw InternalError("check row out of order: " + rows[i].check_name);
      report.rows.push_back(std::move(rows[i]));
    }
  }
  return report;
}

void write_check_report_csv(std::ostream& out, const CheckReport& report) {
  out << "check_name,measured,bound_or_target,tolerance,margin,status\n";
  for (const CheckRow& r : report.rows) {
    out << r.check_name << ',' << format_real(r.measured) << ',' << format_real(r.bound_or_target)
        << ',' << format_real(r.tolerance) << ',' << format_real(r.margin()) << ','
        << (r.passed() ? "pass" : "fail") << '\n';
  }
}

}  // namespace aispo
