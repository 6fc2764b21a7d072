#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "previewflow/rng.hpp"

namespace pflow {

/// h x w x d grid of 32-bit reals stored row-major as (y, x, c), tagged with
/// the flow time t in [0, 1]. This is the state x_t of the sampling ODE at any
/// resolution.
class LatentGrid {
 public:
  LatentGrid() = default;
  /// Zero grid. Throws DimensionError unless h, w, d >= 1.
  LatentGrid(int h, int w, int d, double t = 0.0);
  /// Adopts `data`; length must equal h*w*d and every entry must be finite.
  LatentGrid(int h, int w, int d, std::vector<float> data, double t = 0.0);

  static LatentGrid filled(int h, int w, int d, float value, double t = 0.0);

  int h() const { return h_; }
  int w() const { return w_; }
  int d() const { return d_; }
  int positions() const { return h_ * w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double t() const { return t_; }
  void set_t(double t);

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * w_ + x) * d_ + c;
  }

  bool same_shape(const LatentGrid& other) const {
    return h_ == other.h_ && w_ == other.w_ && d_ == other.d_;
  }
  bool all_finite() const;

  friend bool operator==(const LatentGrid& a, const LatentGrid& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  int h_ = 0;
  int w_ = 0;
  int d_ = 0;
  double t_ = 0.0;
  std::vector<float> data_;
};

void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* what);

// Elementwise helpers. All require matching shapes.
LatentGrid operator+(const LatentGrid& a, const LatentGrid& b);
LatentGrid operator-(const LatentGrid& a, const LatentGrid& b);
LatentGrid operator*(double s, const LatentGrid& a);
/// y += a * x, in place.
void axpy(double a, const LatentGrid& x, LatentGrid& y);
/// Euclidean norm over all entries, accumulated in double.
double l2_norm(const LatentGrid& a);
double max_abs_diff(const LatentGrid& a, const LatentGrid& b);

/// Strictly increasing times t_0 = 0 < ... < t_N = 1.
class TimestepSchedule {
 public:
  /// Validates the invariants; throws ContractError on violation.
  explicit TimestepSchedule(std::vector<double> ts);

  int steps() const { return static_cast<int>(ts_.size()) - 1; }
  double operator[](std::size_t i) const { return ts_[i]; }
  double delta(std::size_t i) const { return ts_[i + 1] - ts_[i]; }
  const std::vector<double>& times() const { return ts_; }

 private:
  std::vector<double> ts_;
};

/// ts[i] = i / N. Throws ContractError for N < 1.
TimestepSchedule linear_schedule(int n);

/// i.i.d. standard normal entries at t = 0, filled in row-major order.
LatentGrid gaussian_noise(int h, int w, int d, SeededRng& rng);

}  // namespace pflow
