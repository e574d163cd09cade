#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "aispo/errors.hpp"
#include "aispo/optimizer.hpp"
#include "aispo/oracles.hpp"
#include "helpers.hpp"

using namespace aispo;

namespace {

Batch<Trajectory> chain_batch(int n, std::uint64_t seed) {
  const TabularMdp mdp = test::standard_chain();
  const auto pi = test::bernoulli_policy(5, 0.5);
  Batch<Trajectory> batch;
  batch.trajectories = sample_trajectories(mdp, pi, 12, static_cast<std::size_t>(n), seed);
  batch.advantages = exact_advantages(batch.trajectories, solve_policy_exact(mdp, pi.probabilities()));
  return batch;
}

OptimConfig small_chain_config() {
  OptimConfig c;
  c.learning_rate = 0.01;
  c.minibatch_size = 64;
  c.updates_per_batch = 64;
  c.batch_transitions = 992;
  c.gamma = 0.8;
  c.lr_decay = Decay::kLinearToZero;
  c.clip_decay = Decay::kConstant;
  c.discount_weighting = false;
  c.total_timesteps = 992 * 10;
  c.horizon = 62;
  return c;
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("Adam takes two bias-corrected steps") {
    AdamState state(2);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd g1(2), g2(2);
    g1 << 1.0, -2.0;
    g2 << 3.0, 0.5;
    adam_step(state, x, g1, 0.1, 1e-8);
    // First step: m_hat = g, v_hat = g^2.
    CHECK(x[0] == doctest::Approx(0.1 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(-0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
    adam_step(state, x, g2, 0.1, 1e-8);
    for (int j = 0; j < 2; ++j) {
      const double m = (0.9 * 0.1 * g1[j] + 0.1 * g2[j]) / (1.0 - 0.81);
      const double v = (0.999 * 0.001 * g1[j] * g1[j] + 0.001 * g2[j] * g2[j]) / (1.0 - 0.999 * 0.999);
      const double first = 0.1 * g1[j] / (std::abs(g1[j]) + 1e-8);
      CHECK(x[j] == doctest::Approx(first + 0.1 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-12));
    }
    CHECK(state.step == 2);
    Eigen::VectorXd wrong = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(adam_step(state, x, wrong, 0.1, 1e-8), ValidationError);
  }

  TEST_CASE("minibatch gradient is the weighted mean of per-step gradients") {
    const Batch<Trajectory> batch = chain_batch(4, 1);
    auto tilde = test::bernoulli_policy(5, 0.6);
    Eigen::VectorXd theta = tilde.parameters();
    for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] += 0.05 * static_cast<double>(j % 3);
    tilde.set_parameters(theta);
    ObjectiveSpec spec;
    spec.schedule = AlphaSchedule({0.5, 1.0});
    spec.gamma = 0.8;
    const std::vector<TimestepRef> refs{{0, 0}, {1, 5}, {3, 11}, {2, 7}};
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(tilde.n_params());
    for (const TimestepRef& r : refs) {
      expected += std::pow(0.8, r.t) * grad_f_alpha(batch.trajectories[r.trajectory], tilde, spec.schedule,
                                                    batch.advantages[r.trajectory], r.t);
    }
    expected /= 4.0;
    CHECK((grad_objective_minibatch(batch, tilde, refs, spec) - expected).norm() < 1e-14);
    const auto f = [&](const Eigen::VectorXd& th) {
      auto q = tilde;
      q.set_parameters(th);
      return evaluate_objective(batch, q, refs, spec).objective;
    };
    CHECK(relative_error(grad_objective_minibatch(batch, tilde, refs, spec),
                         central_difference(f, theta)) < 1e-8);
  }

  TEST_CASE("objective at the behavior policy is the mean advantage and nothing clips") {
    const Batch<Trajectory> batch = chain_batch(3, 2);
    const auto pi = test::bernoulli_policy(5, 0.5);
    ObjectiveSpec spec;
    spec.omega = 0.2;
    spec.discount_weighting = false;
    const auto refs = batch.all_timesteps();
    CHECK(refs.size() == 36);
    double mean = 0.0;
    for (const auto& a : batch.advantages) for (double x : a) mean += x;
    mean /= 36.0;
    const ObjectiveStats st = evaluate_objective(batch, pi, refs, spec);
    CHECK(st.objective == doctest::Approx(mean).epsilon(1e-14));
    CHECK(st.clip_fraction == 0.0);
    CHECK(st.max_ratio == doctest::Approx(1.0));
    CHECK_THROWS_AS(evaluate_objective(batch, pi, std::span<const TimestepRef>{}, spec), ValidationError);
    const std::vector<TimestepRef> bad{{5, 0}};
    CHECK_THROWS_AS(grad_objective_minibatch(batch, pi, bad, spec), ValidationError);
  }

  TEST_CASE("clipped terms contribute no gradient") {
    const Batch<Trajectory> batch = chain_batch(1, 3);
    auto tilde = test::bernoulli_policy(5, 0.95);
    const AlphaSchedule s({1.0});
    for (int t = 0; t < batch.trajectories[0].size(); ++t) {
      const double rho = smoothed_ratio_product(batch.trajectories[0], tilde, s, t);
      const double adv = batch.advantages[0][t];
      const Eigen::VectorXd g = grad_f_alpha_clipped(batch.trajectories[0], tilde, s, batch.advantages[0], t, 0.2);
      if (clip_active(rho, adv, 0.2)) {
        CHECK(g.norm() == 0.0);
      } else {
        CHECK((g - grad_f_alpha(batch.trajectories[0], tilde, s, batch.advantages[0], t)).norm() == 0.0);
      }
    }
  }

  TEST_CASE("tabular critic fits per-state means") {
    const Batch<Trajectory> batch = chain_batch(2, 4);
    std::vector<std::vector<double>> targets;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(5), count = Eigen::VectorXd::Zero(5);
    for (const Trajectory& tr : batch.trajectories) {
      targets.push_back(discounted_returns(tr, 0.8, 0.0));
      for (int t = 0; t < tr.size(); ++t) {
        sum[tr[t].state] += targets.back()[t];
        count[tr[t].state] += 1.0;
      }
    }
    TabularCritic critic(5);
    const std::vector<int> unvisited = critic.fit(batch.trajectories, targets);
    for (int s = 0; s < 5; ++s) {
      if (count[s] > 0) {
        CHECK(critic(s) == doctest::Approx(sum[s] / count[s]));
      } else {
        CHECK(critic(s) == 0.0);
        CHECK(std::find(unvisited.begin(), unvisited.end(), s) != unvisited.end());
      }
    }
  }

  TEST_CASE("mlp critic reduces its training loss") {
    std::vector<ContinuousTrajectory> trajs(1);
    std::vector<std::vector<double>> targets(1);
    for (int t = 0; t < 256; ++t) {
      Eigen::VectorXd s(4);
      s << std::sin(0.1 * t), std::cos(0.1 * t), 0.01 * t, -0.5;
      trajs[0].transitions.push_back({s, Eigen::VectorXd::Zero(2), 0.0, s, 0.0, t});
      targets[0].push_back(2.0 * s[0] - s[1] + 1.0);
    }
    MlpCritic critic(4, 3, 3e-3, 30, 32);
    CounterRng rng(0, Stream::kMinibatch);
    const std::vector<double> losses = critic.fit(trajs, targets, rng);
    CHECK(losses.size() == 31);
    CHECK(losses.back() < 0.05 * losses.front());
  }

  TEST_CASE("configuration validation") {
    OptimConfig c;
    CHECK_NOTHROW(validate_config(c));
    c.learning_rate = 0.0;
    CHECK_THROWS_WITH_AS(validate_config(c), doctest::Contains("learning_rate"), ValidationError);
    c = OptimConfig{};
    c.clip_omega = 1.0;
    CHECK_THROWS_WITH_AS(validate_config(c), doctest::Contains("clip_omega"), ValidationError);
    c = OptimConfig{};
    c.gae_lambda = 1.5;
    CHECK_THROWS_AS(validate_config(c), ValidationError);
    CHECK(trajectories_per_batch(small_chain_config(), 62) == 16);
    CHECK(trajectories_per_batch(small_chain_config(), 100) == 10);
  }

  TEST_CASE("chain training improves the exact value and is reproducible") {
    const OptimConfig c = small_chain_config();
    const TabularTask task{test::standard_chain(), 62};
    TrainOptions<TabularTask> one;
    one.record_params = true;
    const auto a = train(task, TabularSoftmaxPolicy(5, 2), TabularCritic(5), c, one);
    TrainOptions<TabularTask> three;
    three.threads = 3;
    three.record_params = true;
    const auto b = train(task, TabularSoftmaxPolicy(5, 2), TabularCritic(5), c, three);
    CHECK(a.curve.size() == 11);
    CHECK(a.parameter_history.size() == 1 + 10 * 64);
    CHECK(*a.curve.back().eta_oracle > *a.curve.front().eta_oracle + 1.0);
    CHECK(a.final_policy.parameters() == b.final_policy.parameters());
    std::ostringstream ca, cb;
    write_learning_curve_csv(ca, a.curve);
    write_learning_curve_csv(cb, b.curve);
    CHECK(ca.str() == cb.str());
    CHECK(ca.str().rfind(
              "iteration,timesteps,eta_oracle,mean_return_mc,objective,clip_fraction,max_ratio,seed\n", 0) == 0);
  }

  TEST_CASE("evaluation stream is independent of the training stream") {
    const TabularTask task{test::standard_chain(), 62};
    const auto pi = test::bernoulli_policy(5, 0.5);
    const double a = evaluate_mean_return(task, pi, 0, 64, 1);
    CHECK(a == evaluate_mean_return(task, pi, 0, 64, 3));
    CHECK(a != evaluate_mean_return(task, pi, 1, 64, 1));
    CHECK_THROWS_AS(evaluate_mean_return(task, pi, 0, 0), ValidationError);
  }

  TEST_CASE("zero gradient leaves parameters unchanged and decays the moments") {
    AdamState state(2);
    Eigen::VectorXd x(2);
    x << 1.0, -1.0;
    Eigen::VectorXd g(2);
    g << 0.5, 0.5;
    adam_step(state, x, g, 0.1, 1e-8);
    const Eigen::VectorXd m = state.m;
    const Eigen::VectorXd v = state.v;
    AdamState fresh(2);
    Eigen::VectorXd y = x;
    adam_step(fresh, y, Eigen::VectorXd::Zero(2), 0.1, 1e-8);
    CHECK(y == x);
    CHECK(fresh.m.isZero());
    adam_step(state, x, Eigen::VectorXd::Zero(2), 0.1, 1e-8);
    CHECK(state.m.isApprox(0.9 * m));
    CHECK(state.v.isApprox(0.999 * v));
  }

  TEST_CASE("single-step minibatch equals the clipped term gradient times its weight") {
    const Batch<Trajectory> batch = chain_batch(2, 6);
    const auto tilde = test::bernoulli_policy(5, 0.9);
    ObjectiveSpec spec;
    spec.schedule = AlphaSchedule({0.5, 1.0});
    spec.omega = 0.2;
    spec.gamma = 0.8;
    for (int t = 0; t < 12; ++t) {
      const std::vector<TimestepRef> one{{1, t}};
      const Eigen::VectorXd expected =
          std::pow(0.8, t) * grad_f_alpha_clipped(batch.trajectories[1], tilde, spec.schedule,
                                                  batch.advantages[1], t, 0.2);
      CHECK((grad_objective_minibatch(batch, tilde, one, spec) - expected).norm() < 1e-15);
    }
  }

  TEST_CASE("at the behavior policy the clipped gradient is the plain policy gradient") {
    const Batch<Trajectory> batch = chain_batch(4, 7);
    const auto pi = test::bernoulli_policy(5, 0.5);
    ObjectiveSpec spec;
    spec.omega = 0.1;
    spec.gamma = 0.8;
    const auto refs = batch.all_timesteps();
    Eigen::VectorXd plain = Eigen::VectorXd::Zero(pi.n_params());
    for (const TimestepRef& r : refs) {
      const Transition& tr = batch.trajectories[r.trajectory][r.t];
      plain += std::pow(0.8, r.t) * batch.advantages[r.trajectory][r.t] * pi.grad_log_prob(tr.state, tr.action);
    }
    plain /= static_cast<double>(refs.size());
    CHECK((grad_objective_minibatch(batch, pi, refs, spec) - plain).norm() < 1e-13);
    CHECK(evaluate_objective(batch, pi, refs, spec).clip_fraction == 0.0);
  }

  TEST_CASE("tabular critic reproduces single-visit returns and the geometric series") {
    Trajectory line;
    line.truncated_at = 3;
    for (int t = 0; t < 3; ++t) line.transitions.push_back({t, 0, 1.0 + t, t + 1, 0.0, t});
    const std::vector<double> ret = discounted_returns(line, 0.5, 0.0);
    const TabularCritic fitted = fit_value_function({line}, {ret}, 4);
    for (int s = 0; s < 3; ++s) CHECK(fitted(s) == ret[s]);

    Eigen::MatrixXd r(1, 1);
    r << 1.0;
    Eigen::VectorXd mu(1);
    mu << 1.0;
    const TabularMdp constant(1, 1, {1.0}, r, 0.8, mu);
    const auto pi = TabularSoftmaxPolicy(1, 1);
    Trajectory long_run = sample_trajectory(constant, pi, 200, 0, 0);
    const TabularCritic five =
        fit_value_function({long_run}, {discounted_returns(long_run, 0.8, 0.0)}, 1);
    // Mean over t of (1 - 0.8^(200 - t)) / 0.2.
    CHECK(std::abs(five(0) - 5.0) < 0.15);
    const std::vector<double> head(discounted_returns(long_run, 0.8, 0.0));
    CHECK(std::abs(head[0] - 5.0) < 1e-3);
  }

  TEST_CASE("tabular critic matches the exact values within 3 standard errors") {
    const TabularMdp mdp = test::standard_chain();
    const auto pi = test::bernoulli_policy(5, 0.5);
    const ExactSolution sol = solve_policy_exact(mdp, pi.probabilities());
    const auto trajs = sample_trajectories(mdp, pi, 62, 10000, 8);
    std::vector<std::vector<double>> targets;
    std::vector<std::vector<double>> per_state(5);
    for (const Trajectory& tr : trajs) {
      // Bootstrapping the tail with the exact value keeps late targets unbiased.
      targets.push_back(discounted_returns(tr, 0.8, sol.v[tr[tr.size() - 1].next_state]));
      for (int t = 0; t < tr.size(); ++t) per_state[tr[t].state].push_back(targets.back()[t]);
    }
    const TabularCritic critic = fit_value_function(trajs, targets, 5);
    for (int s = 0; s < 5; ++s) {
      const SampleStats st = summarize(per_state[s]);
      // Visits within a trajectory are correlated, so widen the iid SE by the
      // number of visits per trajectory.
      const double se = st.std / std::sqrt(static_cast<double>(trajs.size()));
      CHECK(std::abs(critic(s) - sol.v[s]) < 3.0 * se);
    }
  }

  TEST_CASE("mlp critic loss is non-increasing within 5 percent per epoch") {
    const PointMassTask task{PointMassEnv{}};
    const GaussianMlpPolicy pi(4, 2, 2);
    std::vector<ContinuousTrajectory> trajs;
    std::vector<std::vector<double>> targets;
    for (int k = 0; k < 4; ++k) {
      CounterRng rng(2, Stream::kTrajectory, static_cast<std::uint64_t>(k), 0);
      trajs.push_back(task.sample(pi, rng));
      targets.push_back(discounted_returns(trajs.back(), 0.99, 0.0));
    }
    MlpCritic critic(4, 2);
    CounterRng rng(2, Stream::kMinibatch);
    const std::vector<double> losses = critic.fit(trajs, targets, rng);
    for (std::size_t e = 1; e < losses.size(); ++e) CHECK(losses[e] <= 1.05 * losses[e - 1]);
    CHECK(losses.back() < losses.front());
  }

  TEST_CASE("zero updates per batch leave the policy unchanged") {
    OptimConfig c = small_chain_config();
    c.updates_per_batch = 0;
    c.total_timesteps = 992 * 3;
    const TabularTask task{test::standard_chain(), 62};
    const auto result = train(task, TabularSoftmaxPolicy(5, 2), TabularCritic(5), c);
    CHECK(result.final_policy.parameters().isZero());
    for (const LearningCurveRow& row : result.curve) {
      CHECK(*row.eta_oracle == doctest::Approx(5.64).epsilon(1e-14));
    }
  }
}
