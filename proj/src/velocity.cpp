#include "previewflow/velocity.hpp"

#include <cmath>

#include "previewflow/error.hpp"

namespace pflow {

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::ChannelAffine: return "analytic-channel-affine";
    case FieldKind::Blur: return "analytic-blur";
    case FieldKind::ToyNet: return "toy-net";
    case FieldKind::Custom: return "custom";
  }
  return "unknown";
}

LatentGrid VelocityField::eval(const LatentGrid& x, double t, std::span<const float> cond) const {
  if (!(t >= 0.0 && t <= 1.0)) throw ContractError("velocity eval: t outside [0, 1]");
  if (static_cast<int>(cond.size()) != condition_arity()) {
    throw ContractError("velocity eval: condition arity " + std::to_string(cond.size()) +
                        " does not match field arity " + std::to_string(condition_arity()));
  }
  if (x.empty()) throw DimensionError("velocity eval: empty grid");
  LatentGrid out(x.h(), x.w(), x.d(), x.t());
  evaluate(x, t, cond, out);
  return out;
}

ChannelAffineField::ChannelAffineField(int channels, std::vector<float> matrix,
                                       std::vector<float> bias)
    : channels_(channels), matrix_(std::move(matrix)), bias_(std::move(bias)) {
  if (channels < 1) throw DimensionError("channel-affine field needs >= 1 channel");
  if (matrix_.size() != static_cast<std::size_t>(channels) * channels ||
      bias_.size() != static_cast<std::size_t>(channels)) {
    throw DimensionError("channel-affine field: matrix must be d x d and bias length d");
  }
}

ChannelAffineField ChannelAffineField::scaled_identity(int channels, float scale) {
  std::vector<float> m(static_cast<std::size_t>(channels) * channels, 0.0f);
  for (int c = 0; c < channels; ++c) m[c * channels + c] = scale;
  return ChannelAffineField(channels, std::move(m), std::vector<float>(channels, 0.0f));
}

ChannelAffineField ChannelAffineField::constant(std::vector<float> value) {
  const int d = static_cast<int>(value.size());
  return ChannelAffineField(d, std::vector<float>(static_cast<std::size_t>(d) * d, 0.0f),
                            std::move(value));
}

void ChannelAffineField::evaluate(const LatentGrid& x, double, std::span<const float>,
                                  LatentGrid& out) const {
  if (x.d() != channels_) throw DimensionError("channel-affine field: channel count mismatch");
  const int d = channels_;
  auto in = x.data();
  auto o = out.data();
  const auto positions = static_cast<std::ptrdiff_t>(x.positions());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < positions; ++p) {
    const float* xp = in.data() + p * d;
    float* op = o.data() + p * d;
    for (int r = 0; r < d; ++r) {
      float acc = bias_[r];
      for (int c = 0; c < d; ++c) acc += matrix_[r * d + c] * xp[c];
      op[r] = acc;
    }
  }
}

GaussianOracleField::GaussianOracleField(double mean, double std) : mean_(mean), std_(std) {
  if (!(std >= 0.0)) throw ContractError("gaussian oracle: std must be >= 0");
}

namespace {

struct OracleCoefficients {
  double slope;   // v = mean + slope * (x - t * mean)
  double x0_gain; // E[x0 | x] = x0_gain * (x - t * mean)
};

OracleCoefficients oracle_coefficients(double t, double std) {
  const double var = std::max((1.0 - t) * (1.0 - t) + t * t * std * std, 1e-12);
  return {(t * std * std - (1.0 - t)) / var, (1.0 - t) / var};
}

}  // namespace

double GaussianOracleField::noise_estimate(double x, double t) const {
  return oracle_coefficients(t, std_).x0_gain * (x - t * mean_);
}

void GaussianOracleField::evaluate(const LatentGrid& x, double t, std::span<const float>,
                                   LatentGrid& out) const {
  const auto k = oracle_coefficients(t, std_);
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    o[i] = static_cast<float>(mean_ + k.slope * (in[i] - t * mean_));
  }
}

BlurField::BlurField(Padding padding, float gain) : padding_(padding), gain_(gain) {}

namespace {

// Maps a possibly out-of-range coordinate; returns -1 for zero padding.
int pad_index(int i, int n, Padding padding) {
  if (i >= 0 && i < n) return i;
  switch (padding) {
    case Padding::Zero: return -1;
    case Padding::Circular: return ((i % n) + n) % n;
    case Padding::Reflect:
      if (n == 1) return 0;
      // Mirror without repeating the edge: -1 -> 1, n -> n - 2.
      while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
      return i;
  }
  return -1;
}

}  // namespace

void BlurField::evaluate(const LatentGrid& x, double, std::span<const float>,
                         LatentGrid& out) const {
  const float scale = gain_ / 9.0f;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < x.h(); ++y) {
    for (int xx = 0; xx < x.w(); ++xx) {
      for (int c = 0; c < x.d(); ++c) {
        float acc = 0.0f;
        for (int dy = -1; dy <= 1; ++dy) {
          const int sy = pad_index(y + dy, x.h(), padding_);
          if (sy < 0) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int sx = pad_index(xx + dx, x.w(), padding_);
            if (sx < 0) continue;
            acc += x.at(sy, sx, c);
          }
        }
        out.at(y, xx, c) = scale * acc;
      }
    }
  }
}

}  // namespace pflow
