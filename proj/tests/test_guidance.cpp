#include <doctest.h>

#include "previewflow/error.hpp"
#include "previewflow/guidance.hpp"

using namespace pflow;

namespace {
GuidanceState state_for(LatentGrid target, double alpha, int k) {
  GuidanceState s;
  s.target = std::move(target);
  s.alpha = alpha;
  s.k = k;
  return s;
}
}  // namespace

TEST_CASE("zero residual leaves the state unchanged") {
  SeededRng rng(1, streams::kTest);
  const LatentGrid x = gaussian_noise(4, 4, 3, rng);
  const BlurField blur;
  const auto s = state_for(blur.eval(x, 0.5), 0.5, 3);
  const GuidanceResult r = guidance_step(x, s, blur, 0.5, {});
  CHECK(max_abs_diff(r.x, x) <= 1e-6);
  CHECK(r.evals == 3);
}

TEST_CASE("linear field contracts the residual by 1 - alpha") {
  // v(x) = x: r' = target - (x + alpha r) = (1 - alpha) r.
  const auto field = ChannelAffineField::scaled_identity(3, 1.0f);
  SeededRng rng(2, streams::kTest);
  const LatentGrid x = gaussian_noise(6, 6, 3, rng);
  const LatentGrid target = gaussian_noise(6, 6, 3, rng);
  for (double alpha : {0.04, 0.5, 1.0}) {
    const auto s = state_for(target, alpha, 1);
    const double before = l2_norm(target - field.eval(x, 0.3));
    const GuidanceResult r = guidance_step(x, s, field, 0.3, {});
    const double after = l2_norm(target - field.eval(r.x, 0.3));
    CHECK(std::abs(after / before - (1.0 - alpha)) <= 1e-6);
  }
}

TEST_CASE("k iterations compound the contraction") {
  const auto field = ChannelAffineField::scaled_identity(1, 1.0f);
  const LatentGrid x = LatentGrid::filled(2, 2, 1, 0.0f);
  const auto s = state_for(LatentGrid::filled(2, 2, 1, 1.0f), 0.5, 3);
  const GuidanceResult r = guidance_step(x, s, field, 0.3, {});
  // Residual 1 -> 0.125 after three halvings, so x = 0.875.
  for (float v : r.x.data()) CHECK(v == doctest::Approx(0.875));
  CHECK(r.evals == 3);
}

TEST_CASE("target comes from the stored velocity through the operator") {
  SeededRng rng(3, streams::kTest);
  const LatentGrid v = gaussian_noise(4, 4, 2, rng);
  const auto op = nearest_operator(4, 4, 2);
  CHECK(guidance_target(op, v) == op.apply(v));
}

TEST_CASE("invalid settings are rejected") {
  const auto field = ChannelAffineField::scaled_identity(1, 1.0f);
  const LatentGrid x(2, 2, 1);
  CHECK_THROWS_AS(guidance_step(x, state_for(LatentGrid(2, 2, 1), 0.1, 0), field, 0.3, {}),
                  ContractError);
  CHECK_THROWS_AS(guidance_step(x, state_for(LatentGrid(2, 2, 1), -0.1, 1), field, 0.3, {}),
                  ContractError);
  CHECK_THROWS_AS(guidance_step(x, state_for(LatentGrid(4, 4, 1), 0.1, 1), field, 0.3, {}),
                  DimensionError);
}
