#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "aispo/errors.hpp"
#include "aispo/oracles.hpp"
#include "aispo/policies.hpp"
#include "aispo/rng.hpp"

using namespace aispo;

namespace {

Eigen::VectorXd random_vector(Eigen::Index n, CounterRng& rng, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

}  // namespace

TEST_SUITE("policies") {
  TEST_CASE("softmax rows are distributions and log probs are consistent") {
    Eigen::MatrixXd logits(2, 3);
    logits << 0.0, 1.0, 2.0, -1.0, 0.5, 0.5;
    const auto pi = TabularSoftmaxPolicy::from_logits(logits);
    const PolicyTable p = pi.probabilities();
    for (int s = 0; s < 2; ++s) {
      CHECK(p.row(s).sum() == doctest::Approx(1.0).epsilon(1e-15));
      for (int a = 0; a < 3; ++a) CHECK(std::exp(pi.log_prob(s, a)) == doctest::Approx(p(s, a)));
    }
    const double z = std::exp(0.0) + std::exp(1.0) + std::exp(2.0);
    CHECK(p(0, 2) == doctest::Approx(std::exp(2.0) / z));
    CHECK(pi.n_params() == 6);
  }

  TEST_CASE("negative infinite logits give zero probability") {
    const double ninf = -std::numeric_limits<double>::infinity();
    Eigen::MatrixXd logits(1, 3);
    logits << 0.0, ninf, 0.0;
    const auto pi = TabularSoftmaxPolicy::from_logits(logits);
    CHECK(pi.prob(0, 1) == 0.0);
    CHECK(pi.log_prob(0, 1) == ninf);
    CHECK(pi.prob(0, 0) == doctest::Approx(0.5));
    CounterRng rng(1, Stream::kTrajectory);
    for (int k = 0; k < 200; ++k) CHECK(pi.sample(0, rng) != 1);
    CHECK(pi.grad_log_prob(0, 0).allFinite());
    Eigen::MatrixXd dead(1, 2);
    dead << ninf, ninf;
    CHECK_THROWS_AS(TabularSoftmaxPolicy::from_logits(dead), ValidationError);
  }

  TEST_CASE("importance ratio needs behavior support") {
    const double ninf = -std::numeric_limits<double>::infinity();
    Eigen::MatrixXd logits(1, 2);
    logits << 0.0, ninf;
    const auto behavior = TabularSoftmaxPolicy::from_logits(logits);
    const TabularSoftmaxPolicy target(1, 2);
    CHECK(ratio(target, behavior, 0, 0) == doctest::Approx(0.5));
    CHECK_THROWS_AS(ratio(target, behavior, 0, 1), SupportError);
  }

  TEST_CASE("from_probabilities and state_independent reproduce their input") {
    PolicyTable p(2, 2);
    p << 0.3, 0.7, 0.9, 0.1;
    CHECK(TabularSoftmaxPolicy::from_probabilities(p).probabilities().isApprox(p, 1e-14));
    const auto si = TabularSoftmaxPolicy::state_independent(3, Eigen::Vector2d(0.25, 0.75));
    for (int s = 0; s < 3; ++s) CHECK(si.prob(s, 1) == doctest::Approx(0.75));
    p(0, 0) = 0.5;
    CHECK_THROWS_AS(TabularSoftmaxPolicy::from_probabilities(p), ValidationError);
  }

  TEST_CASE("tabular score matches finite differences") {
    CounterRng rng(4, Stream::kInit);
    TabularSoftmaxPolicy pi(3, 4);
    pi.set_parameters(random_vector(12, rng));
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 4; ++a) {
        const auto f = [&](const Eigen::VectorXd& th) {
          TabularSoftmaxPolicy q(3, 4);
          q.set_parameters(th);
          return q.log_prob(s, a);
        };
        const Eigen::VectorXd fd = central_difference(f, pi.parameters());
        CHECK(relative_error(pi.grad_log_prob(s, a), fd) < 1e-8);
      }
    }
  }

  TEST_CASE("sampling frequencies follow the probabilities") {
    PolicyTable p(1, 3);
    p << 0.2, 0.3, 0.5;
    const auto pi = TabularSoftmaxPolicy::from_probabilities(p);
    CounterRng rng(0, Stream::kTrajectory);
    Eigen::Vector3d counts = Eigen::Vector3d::Zero();
    const int n = 20000;
    for (int k = 0; k < n; ++k) counts[pi.sample(0, rng)] += 1.0;
    for (int a = 0; a < 3; ++a) {
      CHECK(std::abs(counts[a] / n - p(0, a)) < 4.0 * std::sqrt(p(0, a) * (1 - p(0, a)) / n));
    }
  }

  TEST_CASE("mlp backward matches finite differences") {
    const Mlp net(4, 2);
    CounterRng rng(2, Stream::kInit);
    Eigen::VectorXd params(net.n_params());
    net.initialize(params.data(), rng, 1.0);
    params += random_vector(params.size(), rng, 0.1);
    const Eigen::VectorXd x = random_vector(4, rng);
    const Eigen::VectorXd dout = random_vector(2, rng);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
    net.backward(x, params.data(), dout, grad.data());
    const auto f = [&](const Eigen::VectorXd& th) { return dout.dot(net.forward(x, th.data())); };
    CHECK(relative_error(grad, central_difference(f, params)) < 1e-7);
    CHECK(net.n_params() == 4 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
  }

  TEST_CASE("Gaussian log density has the closed form") {
    GaussianMlpPolicy pi(4, 2, 3);
    Eigen::VectorXd theta = pi.parameters();
    theta.tail(2) << 0.3, -0.2;
    pi.set_parameters(theta);
    CounterRng rng(5, Stream::kInit);
    const Eigen::VectorXd s = random_vector(4, rng);
    const Eigen::VectorXd a = random_vector(2, rng);
    const Eigen::VectorXd mu = pi.mean(s);
    double expected = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double sd = std::exp(theta[theta.size() - 2 + j]);
      const double z = (a[j] - mu[j]) / sd;
      expected += -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    CHECK(pi.log_prob(s, a) == doctest::Approx(expected).epsilon(1e-13));
  }

  TEST_CASE("Gaussian score matches finite differences") {
    GaussianMlpPolicy pi(4, 2, 8);
    CounterRng rng(6, Stream::kInit);
    Eigen::VectorXd theta = pi.parameters() + random_vector(pi.n_params(), rng, 0.05);
    pi.set_parameters(theta);
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd s = random_vector(4, rng);
      const Eigen::VectorXd a = random_vector(2, rng);
      const auto f = [&](const Eigen::VectorXd& th) {
        GaussianMlpPolicy q = pi;
        q.set_parameters(th);
        return q.log_prob(s, a);
      };
      CHECK(relative_error(pi.grad_log_prob(s, a), central_difference(f, theta)) < 1e-7);
    }
  }

  TEST_CASE("Gaussian samples have the policy mean and spread") {
    const GaussianMlpPolicy pi(4, 2, 9);
    const Eigen::VectorXd s = Eigen::VectorXd::Constant(4, 0.3);
    CounterRng rng(7, Stream::kTrajectory);
    const int n = 20000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(2), sq = Eigen::VectorXd::Zero(2);
    for (int k = 0; k < n; ++k) {
      const Eigen::VectorXd a = pi.sample(s, rng);
      sum += a;
      sq += a.cwiseProduct(a);
    }
    const Eigen::VectorXd mean = sum / n;
    const Eigen::VectorXd var = sq / n - mean.cwiseProduct(mean);
    for (int j = 0; j < 2; ++j) {
      CHECK(std::abs(mean[j] - pi.mean(s)[j]) < 4.0 / std::sqrt(n));
      CHECK(std::abs(var[j] - 1.0) < 0.05);
    }
  }

  TEST_CASE("parameter setters validate sizes") {
    TabularSoftmaxPolicy tab(2, 2);
    CHECK_THROWS_AS(tab.set_parameters(Eigen::VectorXd::Zero(3)), ValidationError);
    CHECK_THROWS_AS(tab.log_prob(2, 0), ValidationError);
    GaussianMlpPolicy g(4, 2, 0);
    CHECK_THROWS_AS(g.set_parameters(Eigen::VectorXd::Zero(3)), ValidationError);
    Eigen::VectorXd nan_theta = g.parameters();
    nan_theta[0] = std::nan("");
    CHECK_THROWS_AS(g.set_parameters(nan_theta), ValidationError);
  }

  TEST_CASE("counter generator is a pure function of its coordinates") {
    CounterRng a(42, Stream::kSweep, 3, 9);
    CounterRng b(42, Stream::kSweep, 3, 9);
    CounterRng c(42, Stream::kSweep, 3, 10);
    const auto first = a();
    CHECK(first == b());
    CHECK(first != c());
    CounterRng r(1, Stream::kInit);
    for (int k = 0; k < 1000; ++k) {
      const double u = r.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      CHECK(r.below(7) < 7);
    }
  }

  TEST_CASE("softmax is invariant to a per-row logit shift") {
    CounterRng rng(12, Stream::kInit);
    TabularSoftmaxPolicy a(3, 4);
    a.set_parameters(random_vector(12, rng));
    TabularSoftmaxPolicy b = a;
    Eigen::VectorXd shifted = a.parameters();
    shifted.segment(4, 4).array() += 17.5;
    b.set_parameters(shifted);
    for (int s = 0; s < 3; ++s) {
      for (int act = 0; act < 4; ++act) CHECK(std::abs(a.log_prob(s, act) - b.log_prob(s, act)) < 1e-12);
    }
  }

  TEST_CASE("Gaussian score in log_std is -1 at the mean") {
    const GaussianMlpPolicy pi(4, 2, 4);
    const Eigen::VectorXd s = Eigen::VectorXd::Constant(4, -0.2);
    const Eigen::VectorXd g = pi.grad_log_prob(s, pi.mean(s));
    CHECK(g.tail(2)[0] == doctest::Approx(-1.0));
    CHECK(g.tail(2)[1] == doctest::Approx(-1.0));
    CHECK(g.head(g.size() - 2).norm() == 0.0);
  }
}
