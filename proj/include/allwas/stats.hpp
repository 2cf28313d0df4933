#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace allwas {

/// F1 of one class; 0 when precision and recall are both 0.
double f1_target(std::span<const std::size_t> preds, std::span<const std::size_t> truth,
                 std::size_t target);

/// Unweighted mean of per-class F1 over `num_classes` classes.
double f1_macro(std::span<const std::size_t> preds, std::span<const std::size_t> truth,
                std::size_t num_classes);

enum class WilcoxonMode { kAuto, kExact, kNormalApprox };

struct WilcoxonResult {
  /// W+ : sum of ranks of positive differences x - y.
  double statistic = 0.0;
  /// Two-sided p-value.
  double p = 1.0;
  std::size_t n_used = 0;
  std::size_t zeros_dropped = 0;
  bool exact = false;
};

/// Paired two-sided signed-rank test. Zero differences are dropped; ties
/// share average ranks. kAuto is exact for n <= 20 and the tie-corrected
/// normal approximation (with continuity correction) above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    WilcoxonMode mode = WilcoxonMode::kAuto);

/// Average ranks (1-based) of the values.
std::vector<double> average_ranks(std::span<const double> values);

/// Null distribution of W+ for the given ranks under independent fair signs.
/// Entry v is P(W+ = v / 2); ranks must be multiples of 1/2.
std::vector<double> signed_rank_null_distribution(std::span<const double> ranks);

/// min(1, m * p).
double bonferroni(double p, std::size_t comparisons);

}  // namespace allwas
