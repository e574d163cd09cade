#include "aispo/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "aispo/errors.hpp"
#include "aispo/format.hpp"

namespace aispo {

AlphaSchedule::AlphaSchedule(std::vector<double> suffix) : suffix_(std::move(suffix)) {
  if (suffix_.empty()) throw ValidationError("schedule suffix must be non-empty");
  for (double b : suffix_) {
    if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("schedule entries must lie in [0, 1]");
  }
}

AlphaSchedule AlphaSchedule::all_ones(int length) {
  if (length < 1) throw ValidationError("all-ones schedule needs a positive length");
  return AlphaSchedule(std::vector<double>(static_cast<std::size_t>(length), 1.0));
}

double AlphaSchedule::l1_norm(int t) const {
  double total = 0.0;
  for (int i = first_index(t); i <= t; ++i) total += weight(t, i);
  return total;
}

double AlphaSchedule::l1_distance_to_ones(int t) const {
  // Steps outside the suffix have weight 0 and contribute 1 each.
  double total = static_cast<double>(first_index(t));
  for (int i = first_index(t); i <= t; ++i) total += 1.0 - weight(t, i);
  return total;
}

double AlphaSchedule::l1_bound() const {
  double total = 0.0;
  for (double b : suffix_) total += b;
  return total;
}

std::string AlphaSchedule::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < suffix_.size(); ++k) {
    if (k) out += ' ';
    out += format_real(suffix_[k]);
  }
  return out;
}

AlphaSchedule schedule_from_template(const std::vector<std::optional<double>>& pattern,
                                     double beta, bool fill_prefix, int horizon) {
  if (pattern.empty()) throw ValidationError("schedule_template must be non-empty");
  std::vector<double> suffix;
  for (const auto& entry : pattern) suffix.push_back(entry ? *entry : beta);
  if (fill_prefix) {
    if (pattern.front().has_value()) {
      throw ValidationError("beta_fills_prefix needs the free slot first in schedule_template");
    }
    const int missing = horizon - static_cast<int>(suffix.size());
    if (missing > 0) suffix.insert(suffix.begin(), static_cast<std::size_t>(missing), beta);
  }
  return AlphaSchedule(std::move(suffix));
}

}  // namespace aispo
