#include "aispo/estimators.hpp"
#include "aispo/format.hpp"


namespace aispo {

double smoothed_log_ratio(std::span<const double> log_ratio, const AlphaSchedule& schedule, int t) {
  if (t < 0 || t >= static_cast<int>(log_ratio.size())) {
    throw ValidationError("t outside the trajectory");
  }
  double acc = 0.0;
  for (int i = schedule.first_index(t); i <= t; ++i) {
    const double w = schedule.weight(t, i);
    if (w == 0.0) continue;
    const double term = w * log_ratio[i];
    if (!std::isfinite(term)) {
      throw NumericError("non-finite log ratio in smoothed product at t=" + std::to_string(t) +
                         ", i=" + std::to_string(i));
    }
    acc += term;
  }
  if (!std::isfinite(std::exp(acc))) {
    throw NumericError("smoothed ratio overflows at t=" + std::to_string(t));
  }
  return acc;
}

double l_alpha_from_log_ratios(std::span<const double> log_ratio,
                               std::span<const double> advantages,
                               const AlphaSchedule& schedule, double gamma) {
  if (log_ratio.size() != advantages.size()) {
    throw ValidationError("advantages are not aligned with the trajectory");
  }
  double total = 0.0;
  double discount = 1.0;
  for (int t = 0; t < static_cast<int>(log_ratio.size()); ++t) {
    total += discount * smoothed_ratio_from_log_ratios(log_ratio, schedule, t) * advantages[t];
    discount *= gamma;
  }
  return total;
}

double mean_in_order(std::span<const double> values) {
  if (values.empty()) throw ValidationError("mean of an empty sample");
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

std::vector<double> exact_advantages(const Trajectory& traj, const ExactSolution& solution) {
  std::vector<double> out(traj.transitions.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const Transition& tr = traj.transitions[t];
    if (tr.state < 0 || tr.state >= solution.adv.rows() || tr.action < 0 ||
        tr.action >= solution.adv.cols()) {
      throw ValidationError("trajectory indexes outside the exact solution");
    }
    out[t] = solution.adv(tr.state, tr.action);
  }
  return out;
}

std::vector<std::vector<double>> exact_advantages(const std::vector<Trajectory>& trajectories,
                                                  const ExactSolution& solution) {
  std::vector<std::vector<double>> out;
  out.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) out.push_back(exact_advantages(t, solution));
  return out;
}

SampleStats summarize(std::span<const double> values) {
  SampleStats st;
  st.n = values.size();
  st.mean = mean_in_order(values);
  if (st.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    st.std = std::sqrt(ss / static_cast<double>(st.n - 1));
    st.se = st.std / std::sqrt(static_cast<double>(st.n));
  }
  return st;
}

void write_estimator_report_csv(std::ostream& out, const std::vector<EstimatorReportRow>& rows) {
  out << "estimator_name,schedule,n_traj,horizon,mean,std,bias_vs_oracle,bound_value\n";
  for (const auto& r : rows) {
    out << r.estimator_name << ',' << r.schedule << ',' << r.n_traj << ',' << r.horizon << ','
        << format_real(r.mean) << ',' << format_real(r.std) << ',' << format_real(r.bias_vs_oracle)
        << ',' << format_real(r.bound_value) << '\n';
  }
}

}  // namespace aispo
