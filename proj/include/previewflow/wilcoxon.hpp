#pragma once

#include <span>
#include <string>
#include <vector>

namespace pflow {

/// One paired observation, e.g. a commutator norm at t_D and at t_{D+m}.
struct PairedSample {
  double before = 0.0;
  double after = 0.0;
};

/// Hypothesis about the differences after - before.
enum class Alternative { Less, Greater, TwoSided };
enum class WilcoxonMethod { Auto, Exact, Normal };

std::string to_string(Alternative a);

struct WilcoxonResult {
  /// Sum of ranks of positive differences (after > before).
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p = 1.0;
  /// Pairs left after dropping zero differences.
  int n = 0;
  bool exact = false;
};

/// Wilcoxon signed-rank test. Zero differences are dropped; tied |d| get
/// average ranks. Auto uses the exact null distribution (all 2^n sign
/// patterns, counted by dynamic programming over doubled ranks) for n <= 25
/// and the tie-corrected normal approximation with continuity correction
/// above. Throws DegenerateInputError if every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const PairedSample> pairs, Alternative alternative,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

/// Average ranks (1-based) of `values`, ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace pflow
