#include <doctest.h>

#include <cmath>

#include "previewflow/error.hpp"
#include "previewflow/rng.hpp"
#include "previewflow/wilcoxon.hpp"

using namespace pflow;

namespace {

struct Brute {
  double less;
  double greater;
};

// Enumerates all 2^n sign assignments of the ranks of |d|.
Brute enumerate(const std::vector<PairedSample>& pairs) {
  std::vector<double> absd;
  std::vector<int> positive;
  for (const auto& p : pairs) {
    const double d = p.after - p.before;
    if (d == 0.0) continue;
    absd.push_back(std::abs(d));
    positive.push_back(d > 0);
  }
  const std::size_t n = absd.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      below += absd[j] < absd[i];
      equal += absd[j] == absd[i];
    }
    ranks[i] = below + (equal + 1) / 2.0;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < n; ++i) observed += positive[i] ? ranks[i] : 0.0;
  double ge = 0, le = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) w += ranks[i];
    }
    ge += w >= observed - 1e-9;
    le += w <= observed + 1e-9;
  }
  const double total = std::ldexp(1.0, static_cast<int>(n));
  return {le / total, ge / total};
}

}  // namespace

TEST_CASE("worked example: five positive differences") {
  std::vector<PairedSample> pairs;
  for (int i = 1; i <= 5; ++i) pairs.push_back({0.0, static_cast<double>(i)});
  const auto r = wilcoxon_signed_rank(pairs, Alternative::Greater);
  CHECK(r.w_plus == 15.0);
  CHECK(r.w_minus == 0.0);
  CHECK(r.exact);
  CHECK(r.p == 1.0 / 32.0);
  CHECK(wilcoxon_signed_rank(pairs, Alternative::Less).p == 1.0);
  CHECK(wilcoxon_signed_rank(pairs, Alternative::TwoSided).p == 1.0 / 16.0);
}

TEST_CASE("exact p matches sign-pattern enumeration") {
  SeededRng rng(2024, streams::kTest);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(10));
    std::vector<PairedSample> pairs;
    for (int i = 0; i < n; ++i) {
      // Coarse values so ties and zero differences show up.
      const double before = std::round(rng.normal() * 3.0) / 2.0;
      const double after = std::round(rng.normal() * 3.0) / 2.0;
      pairs.push_back({before, after});
    }
    bool all_zero = true;
    for (const auto& p : pairs) all_zero = all_zero && p.after == p.before;
    if (all_zero) {
      CHECK_THROWS_AS(wilcoxon_signed_rank(pairs, Alternative::Less), DegenerateInputError);
      continue;
    }
    const Brute b = enumerate(pairs);
    const auto less = wilcoxon_signed_rank(pairs, Alternative::Less, WilcoxonMethod::Exact);
    const auto greater = wilcoxon_signed_rank(pairs, Alternative::Greater, WilcoxonMethod::Exact);
    const auto two = wilcoxon_signed_rank(pairs, Alternative::TwoSided, WilcoxonMethod::Exact);
    CHECK(std::abs(less.p - b.less) <= 1e-12);
    CHECK(std::abs(greater.p - b.greater) <= 1e-12);
    CHECK(std::abs(two.p - std::min(1.0, 2.0 * std::min(b.less, b.greater))) <= 1e-12);
  }
}

TEST_CASE("two-sided p is invariant to negating every difference") {
  SeededRng rng(5, streams::kTest);
  for (int n : {6, 15, 40}) {
    std::vector<PairedSample> pairs, flipped;
    for (int i = 0; i < n; ++i) {
      const double a = rng.normal();
      const double b = rng.normal() + 0.3;
      pairs.push_back({a, b});
      flipped.push_back({b, a});
    }
    const double p = wilcoxon_signed_rank(pairs, Alternative::TwoSided).p;
    CHECK(p == doctest::Approx(wilcoxon_signed_rank(flipped, Alternative::TwoSided).p).epsilon(1e-12));
    CHECK(wilcoxon_signed_rank(pairs, Alternative::Greater).p ==
          doctest::Approx(wilcoxon_signed_rank(flipped, Alternative::Less).p).epsilon(1e-12));
  }
}

TEST_CASE("normal approximation tracks the exact distribution") {
  SeededRng rng(30, streams::kTest);
  std::vector<PairedSample> pairs;
  for (int i = 0; i < 30; ++i) pairs.push_back({rng.normal(), rng.normal() + 0.2});
  const std::vector<PairedSample> sub(pairs.begin(), pairs.begin() + 12);
  for (auto alt : {Alternative::Less, Alternative::Greater, Alternative::TwoSided}) {
    const auto exact = wilcoxon_signed_rank(sub, alt, WilcoxonMethod::Exact);
    const auto approx = wilcoxon_signed_rank(sub, alt, WilcoxonMethod::Normal);
    CHECK(std::abs(exact.p - approx.p) <= 0.02);
  }
  const auto big = wilcoxon_signed_rank(pairs, Alternative::Greater);
  CHECK_FALSE(big.exact);
  CHECK(big.n == 30);
  CHECK(big.w_plus + big.w_minus == 30.0 * 31.0 / 2.0);
}

TEST_CASE("average ranks") {
  const double v[] = {3.0, 1.0, 3.0, 2.0, 3.0};
  CHECK(average_ranks(v) == std::vector<double>{4.0, 1.0, 4.0, 2.0, 4.0});
}

TEST_CASE("degenerate and invalid input") {
  const std::vector<PairedSample> zero = {{1, 1}, {2, 2}};
  CHECK_THROWS_AS(wilcoxon_signed_rank(zero, Alternative::TwoSided), DegenerateInputError);
  const std::vector<PairedSample> nan = {{1, std::nan("")}};
  CHECK_THROWS_AS(wilcoxon_signed_rank(nan, Alternative::TwoSided), ContractError);
}
