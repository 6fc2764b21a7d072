#include "previewflow/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "previewflow/error.hpp"

namespace pflow {

std::string to_string(Alternative a) {
  switch (a) {
    case Alternative::Less: return "less";
    case Alternative::Greater: return "greater";
    case Alternative::TwoSided: return "two-sided";
  }
  return "unknown";
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

constexpr int kExactLimit = 25;
constexpr int kExactMax = 50;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const PairedSample> pairs, Alternative alternative,
                                    WilcoxonMethod method) {
  std::vector<double> diffs;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.before) || !std::isfinite(p.after)) {
      throw ContractError("wilcoxon: non-finite sample");
    }
    const double d = p.after - p.before;
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw DegenerateInputError("wilcoxon: all differences are zero");

  std::vector<double> abs_d(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) abs_d[i] = std::abs(diffs[i]);
  const auto ranks = average_ranks(abs_d);

  WilcoxonResult r;
  r.n = static_cast<int>(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    (diffs[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
  }

  const bool exact = method == WilcoxonMethod::Exact ||
                     (method == WilcoxonMethod::Auto && r.n <= kExactLimit);
  if (exact) {
    if (r.n > kExactMax) throw ContractError("wilcoxon: exact distribution limited to n <= 50");
    // Doubled ranks are integers even with ties (average ranks are k/2).
    std::vector<int> doubled(ranks.size());
    int total = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total += doubled[i];
    }
    // counts[s] = number of sign patterns whose positive doubled ranks sum to s.
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    int reach = 0;
    for (int dr : doubled) {
      for (int s = reach; s >= 0; --s) {
        if (counts[s] != 0.0) counts[s + dr] += counts[s];
      }
      reach += dr;
    }
    const double patterns = std::ldexp(1.0, r.n);
    const int observed = static_cast<int>(std::lround(2.0 * r.w_plus));
    double upper = 0.0;  // P(W+ >= observed)
    double lower = 0.0;  // P(W+ <= observed)
    for (int s = 0; s <= total; ++s) {
      if (s >= observed) upper += counts[s];
      if (s <= observed) lower += counts[s];
    }
    upper /= patterns;
    lower /= patterns;
    switch (alternative) {
      case Alternative::Greater: r.p = upper; break;
      case Alternative::Less: r.p = lower; break;
      case Alternative::TwoSided: r.p = std::min(1.0, 2.0 * std::min(upper, lower)); break;
    }
    r.exact = true;
    return r;
  }

  const double n = r.n;
  const double mean = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    std::vector<double> sorted = abs_d;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  const double sd = std::sqrt(var);
  const double p_greater = normal_cdf(-(r.w_plus - mean - 0.5) / sd);
  const double p_less = normal_cdf((r.w_plus - mean + 0.5) / sd);
  switch (alternative) {
    case Alternative::Greater: r.p = p_greater; break;
    case Alternative::Less: r.p = p_less; break;
    case Alternative::TwoSided: r.p = std::min(1.0, 2.0 * std::min(p_greater, p_less)); break;
  }
  r.p = std::clamp(r.p, 0.0, 1.0);
  return r;
}

}  // namespace pflow
