#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "aispo/errors.hpp"
#include "aispo/harness.hpp"
#include "helpers.hpp"

using namespace aispo;

namespace {

SweepConfig small_sweep() {
  SweepConfig c;
  c.pi_tilde_right_grid = {0.7, 0.9};
  c.beta_grid = {0.0, 0.5, 1.0};
  c.n_trajectories = 2000;
  c.n_replicates = 10;
  c.seed = 3;
  return c;
}

CheckConfig small_checks() {
  CheckConfig c;
  c.random_instances = 5;
  c.is_trajectories = 2000;
  c.bound_trajectories = 2000;
  c.gradient_trajectories = 500;
  c.enumeration_instances = 2;
  c.gradient_points = 50;
  c.pi_tilde_right_grid = {0.7, 0.9};
  return c;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("sweep rows follow the grid and satisfy the moment identity") {
    const SweepConfig c = small_sweep();
    const auto rows = nchain_sweep(c);
    REQUIRE(rows.size() == 6);
    const TabularMdp mdp = test::standard_chain();
    for (std::size_t g = 0; g < rows.size(); ++g) {
      const SweepRow& r = rows[g];
      CHECK(r.pi_tilde_right == c.pi_tilde_right_grid[g / 3]);
      CHECK(r.beta == c.beta_grid[g % 3]);
      CHECK(r.n_traj == 2000);
      CHECK(r.seed == 3);
      CHECK(std::abs(r.rmse * r.rmse - (r.bias * r.bias + r.std * r.std)) < 1e-9 * r.rmse * r.rmse);
      const double truth = value_difference_exact(mdp, test::bernoulli_table(5, 0.5),
                                                   test::bernoulli_table(5, r.pi_tilde_right));
      CHECK(std::abs(r.oracle_truth - truth) < 1e-12);
      CHECK(r.bias_se > 0.0);
      CHECK(r.std_se > 0.0);
      CHECK(r.rmse_se > 0.0);
    }
  }

  TEST_CASE("sweep output does not depend on the thread count") {
    std::ostringstream a, b;
    write_sweep_csv(a, nchain_sweep(small_sweep(), 1));
    write_sweep_csv(b, nchain_sweep(small_sweep(), 3));
    CHECK(a.str() == b.str());
    CHECK(first_line(a.str()) == "pi_tilde_right,beta,n_traj,n_replicates,bias,std,rmse,oracle_truth,seed");
    std::istringstream lines(a.str());
    std::string line;
    std::getline(lines, line);
    std::getline(lines, line);
    CHECK(line.rfind("0.7,0,2000,10,", 0) == 0);
  }

  TEST_CASE("per-replicate dispersion measures the spread of replicate means") {
    SweepConfig c = small_sweep();
    const auto pooled = nchain_sweep(c);
    c.dispersion = Dispersion::kPerReplicate;
    const auto replicate = nchain_sweep(c);
    for (std::size_t g = 0; g < pooled.size(); ++g) {
      CHECK(replicate[g].bias == doctest::Approx(pooled[g].bias).epsilon(1e-12));
      if (pooled[g].std > 0.0) CHECK(replicate[g].std < pooled[g].std);
    }
  }

  TEST_CASE("all-ones endpoint has no smoothing bias beyond truncation and noise") {
    SweepConfig c = small_sweep();
    c.beta_fills_prefix = true;
    c.n_trajectories = 20000;
    c.n_replicates = 20;
    const auto rows = nchain_sweep(c);
    for (const SweepRow& r : rows) {
      if (r.beta == 1.0) CHECK(std::abs(r.bias) < 4.0 * r.bias_se + 1e-4);
    }
  }

  TEST_CASE("sweep config validation") {
    SweepConfig c = small_sweep();
    c.pi_tilde_right_grid = {1.0};
    CHECK_THROWS_WITH_AS(validate_sweep_config(c), doctest::Contains("pi_tilde_right_grid"),
                         ValidationError);
    c = small_sweep();
    c.schedule_template = {0.5, 1.0};
    CHECK_THROWS_AS(validate_sweep_config(c), ValidationError);
    c = small_sweep();
    c.beta_fills_prefix = true;
    c.schedule_template = {1.0, std::nullopt};
    CHECK_THROWS_WITH_AS(validate_sweep_config(c), doctest::Contains("beta_fills_prefix"),
                         ValidationError);
  }

  TEST_CASE("check report has one row per registered check in order") {
    const CheckConfig c = small_checks();
    const std::vector<std::string> names = registered_checks(c);
    const CheckReport report = theory_check_suite(c, 2);
    REQUIRE(report.rows.size() == names.size());
    for (std::size_t i = 0; i < names.size(); ++i) CHECK(report.rows[i].check_name == names[i]);
    std::ostringstream out;
    write_check_report_csv(out, report);
    const std::string csv = out.str();
    CHECK(first_line(csv) == "check_name,measured,bound_or_target,tolerance,margin,status");
    CHECK(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<long>(names.size()) + 1);
    for (const CheckRow& r : report.rows) {
      if (r.check_name.rfind("performance_difference_identity", 0) == 0 ||
          r.check_name.rfind("value_dependency_equality", 0) == 0) {
        CHECK(r.passed());
      }
    }
  }

  TEST_CASE("check report is identical across thread counts") {
    const CheckConfig c = small_checks();
    std::ostringstream a, b;
    write_check_report_csv(a, theory_check_suite(c, 1));
    write_check_report_csv(b, theory_check_suite(c, 3));
    CHECK(a.str() == b.str());
  }

  TEST_CASE("an injected occupancy fault is caught with the expected residual") {
    CheckConfig c = small_checks();
    c.fault = OracleFault::kOccupancyScale;
    const CheckReport report = theory_check_suite(c, 1);
    CHECK_FALSE(report.all_passed());
    bool seen = false;
    for (const CheckRow& r : report.rows) {
      if (r.check_name == "value_dependency_equality/nchain/pi_tilde=0.9") {
        seen = true;
        CHECK_FALSE(r.passed());
        CHECK(std::abs(r.measured - 0.8 * 1.5045255659520045) < 1e-10);
      }
    }
    CHECK(seen);
  }

  TEST_CASE("check rows pass on margin and fail on non-finite measurements") {
    CheckRow r{"x", 1.0, 1.0, 0.0};
    CHECK(r.passed());
    r.measured = 1.0 + 1e-12;
    CHECK_FALSE(r.passed());
    r.measured = std::nan("");
    CHECK_FALSE(r.passed());
    r.measured = std::numeric_limits<double>::infinity();
    CHECK_FALSE(r.passed());
    CheckConfig c;
    c.gradient_points = 0;
    CHECK_THROWS_AS(validate_check_config(c), ValidationError);
  }

  TEST_CASE("gradient checks are reproducible and tight") {
    const auto a = check_tabular_gradients(GradientTarget::kMinibatchClipped, 50, 1);
    const auto b = check_tabular_gradients(GradientTarget::kMinibatchClipped, 50, 1);
    CHECK(a.max_relative_error == b.max_relative_error);
    CHECK(a.points == 50);
    CHECK(a.points_with_active_clip > 0);
    CHECK(a.max_relative_error < 1e-6);
    const auto g = check_gaussian_gradients(GradientTarget::kTerm, 5, 1);
    CHECK(g.max_relative_error < 1e-6);
  }
}
