#pragma once

#include <optional>
#include <string>
#include <vector>

namespace aispo {

/// Smoothing weights alpha_t stored as a suffix (beta_K, ..., beta_2, beta_1).
/// beta_1 weighs the current step i = t, beta_2 the step before, and every
/// step further back than K gets weight 0.
class AlphaSchedule {
 public:
  /// Entries must lie in [0, 1]; the suffix must be non-empty.
  explicit AlphaSchedule(std::vector<double> suffix);

  /// Weight 1 on the last `length` steps; with length >= horizon this is full
  /// step-based importance sampling.
  static AlphaSchedule all_ones(int length);

  const std::vector<double>& suffix() const { return suffix_; }
  int length() const { return static_cast<int>(suffix_.size()); }

  /// alpha_t^i for 0 <= i <= t.
  double weight(int t, int i) const {
    const int back = t - i;
    return back < length() ? suffix_[length() - 1 - back] : 0.0;
  }
  int first_index(int t) const { return t - length() + 1 > 0 ? t - length() + 1 : 0; }
  double current_weight() const { return suffix_.back(); }

  /// |alpha_t|_1
  double l1_norm(int t) const;
  /// |alpha_t - 1|_1 over i = 0..t
  double l1_distance_to_ones(int t) const;
  /// sum of the suffix, a uniform bound on |alpha_t|_1
  double l1_bound() const;

  /// "0.5 0.5 1"
  std::string to_string() const;

 private:
  std::vector<double> suffix_;
};

/// Suffix template where std::nullopt marks the free beta slot. With
/// `fill_prefix` the first entry is repeated so the suffix spans `horizon`
/// steps, e.g. (beta, 1) becomes (beta, ..., beta, 1).
AlphaSchedule schedule_from_template(const std::vector<std::optional<double>>& pattern,
                                     double beta, bool fill_prefix = false, int horizon = 0);

}  // namespace aispo
