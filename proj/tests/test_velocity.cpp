#include <doctest.h>

#include <cmath>

#include "previewflow/error.hpp"
#include "previewflow/velocity.hpp"

using namespace pflow;

TEST_CASE("blur of a one-hot spreads 1/9 over the neighbourhood") {
  LatentGrid x(5, 5, 1);
  x.at(2, 2, 0) = 1.0f;
  const BlurField blur(Padding::Reflect);
  const LatentGrid v = blur.eval(x, 0.5);
  for (int y = 0; y < 5; ++y) {
    for (int xx = 0; xx < 5; ++xx) {
      const bool inside = std::abs(y - 2) <= 1 && std::abs(xx - 2) <= 1;
      CHECK(v.at(y, xx, 0) == doctest::Approx(inside ? 1.0 / 9.0 : 0.0));
    }
  }
}

TEST_CASE("blur padding modes at the border") {
  LatentGrid x(4, 4, 1);
  x.at(1, 0, 0) = 9.0f;
  // Reflect mirrors row -1 onto row 1, so (0, 0) sees the hot pixel twice.
  CHECK(BlurField(Padding::Reflect).eval(x, 0.0).at(0, 0, 0) == doctest::Approx(2.0));
  CHECK(BlurField(Padding::Zero).eval(x, 0.0).at(0, 0, 0) == doctest::Approx(1.0));
  const LatentGrid c = BlurField(Padding::Circular).eval(x, 0.0);
  CHECK(c.at(0, 3, 0) == doctest::Approx(1.0));
  CHECK(c.at(2, 3, 0) == doctest::Approx(1.0));
  CHECK(c.at(0, 2, 0) == doctest::Approx(0.0));
  CHECK(BlurField(Padding::Zero, 2.0f).eval(x, 0.0).at(2, 1, 0) == doctest::Approx(2.0));
}

TEST_CASE("channel-affine field acts per position") {
  const ChannelAffineField f(2, {1, 2, 3, 4}, {0.5f, -0.5f});
  LatentGrid x(1, 2, 2, {1, 1, 2, 0});
  const LatentGrid v = f.eval(x, 0.3);
  CHECK(v.values() == std::vector<float>{3.5f, 6.5f, 2.5f, 5.5f});
  const auto c = ChannelAffineField::constant({1.0f, 2.0f});
  CHECK(c.eval(x, 0.0).values() == std::vector<float>{1, 2, 1, 2});
  CHECK_THROWS_AS(ChannelAffineField(2, {1, 2, 3}, {0, 0}), DimensionError);
}

TEST_CASE("evaluation validates time and condition") {
  const auto f = ChannelAffineField::scaled_identity(1, 1.0f);
  LatentGrid x(2, 2, 1);
  CHECK_THROWS(f.eval(x, 1.5));
  CHECK_THROWS(f.eval(x, -0.1));
  const float cond[] = {1.0f};
  CHECK_THROWS_AS(f.eval(x, 0.5, cond), ContractError);
  CHECK_THROWS_AS(ChannelAffineField(2, {1, 0, 0, 1}, {0, 0}).eval(x, 0.5), DimensionError);
}

TEST_CASE("gaussian oracle velocity at the endpoints") {
  // t = 0: E[x1 - x0 | x0] = mean - x0.  t = 1: E[x1 - x0 | x1] = x1.
  const GaussianOracleField f(0.7, 0.4);
  LatentGrid x(1, 3, 1, {-1.0f, 0.0f, 2.0f});
  const LatentGrid v0 = f.eval(x, 0.0);
  const LatentGrid v1 = f.eval(x, 1.0);
  for (int i = 0; i < 3; ++i) {
    CHECK(v0.data()[i] == doctest::Approx(0.7 - x.data()[i]).epsilon(1e-6));
    CHECK(v1.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-6));
  }
  // x_t = t * mean sits at the posterior mean of both endpoints.
  LatentGrid centre(1, 1, 1, std::vector<float>{static_cast<float>(0.3 * 0.7)});
  CHECK(f.eval(centre, 0.3).data()[0] == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(f.noise_estimate(0.5, 0.0) == doctest::Approx(0.5));
}
