#pragma once

#include <span>
#include <string>
#include <vector>

#include "previewflow/grid.hpp"

namespace pflow {

using Condition = std::vector<float>;

enum class FieldKind { ChannelAffine, Blur, ToyNet, Custom };

std::string to_string(FieldKind kind);

/// The velocity field v(x, t, cond) driving dx = v dt. Evaluation is pure and
/// deterministic; the output always has the input's shape.
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  virtual FieldKind kind() const = 0;
  virtual int condition_arity() const { return 0; }

  /// Validates t and the condition arity, then evaluates. The result carries
  /// the input's time tag.
  LatentGrid eval(const LatentGrid& x, double t, std::span<const float> cond = {}) const;

 protected:
  virtual void evaluate(const LatentGrid& x, double t, std::span<const float> cond,
                        LatentGrid& out) const = 0;
};

/// Position-wise affine field v(x)_p = A x_p + b acting on the channels of
/// each position independently. Commutes exactly with any selection operator.
class ChannelAffineField final : public VelocityField {
 public:
  /// `matrix` is d x d row-major, `bias` has d entries.
  ChannelAffineField(int channels, std::vector<float> matrix, std::vector<float> bias);

  static ChannelAffineField scaled_identity(int channels, float scale);
  static ChannelAffineField constant(std::vector<float> value);

  FieldKind kind() const override { return FieldKind::ChannelAffine; }
  int channels() const { return channels_; }
  const std::vector<float>& matrix() const { return matrix_; }
  const std::vector<float>& bias() const { return bias_; }

 protected:
  void evaluate(const LatentGrid& x, double t, std::span<const float> cond,
                LatentGrid& out) const override;

 private:
  int channels_;
  std::vector<float> matrix_;
  std::vector<float> bias_;
};

/// Exact rectified-flow velocity for data x1 ~ N(mean, std^2) i.i.d. per
/// entry and noise x0 ~ N(0, 1): v = E[x1 - x0 | x_t]. Position-wise and
/// affine in x with time-dependent coefficients.
class GaussianOracleField final : public VelocityField {
 public:
  GaussianOracleField(double mean, double std);

  FieldKind kind() const override { return FieldKind::ChannelAffine; }
  double mean() const { return mean_; }
  double stddev() const { return std_; }

  /// Posterior mean of the noise component, x0_hat = x_t - t * v.
  double noise_estimate(double x, double t) const;

 protected:
  void evaluate(const LatentGrid& x, double t, std::span<const float> cond,
                LatentGrid& out) const override;

 private:
  double mean_;
  double std_;
};

enum class Padding { Reflect, Circular, Zero };

/// v = gain * (3x3 box filter of x), applied per channel.
class BlurField final : public VelocityField {
 public:
  explicit BlurField(Padding padding = Padding::Reflect, float gain = 1.0f);

  FieldKind kind() const override { return FieldKind::Blur; }
  Padding padding() const { return padding_; }
  float gain() const { return gain_; }

 protected:
  void evaluate(const LatentGrid& x, double t, std::span<const float> cond,
                LatentGrid& out) const override;

 private:
  Padding padding_;
  float gain_;
};

}  // namespace pflow
