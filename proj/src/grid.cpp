#include "previewflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "previewflow/error.hpp"

namespace pflow {

namespace {

void check_dims(int h, int w, int d) {
  if (h < 1 || w < 1 || d < 1) {
    throw DimensionError("grid dimensions must be >= 1, got " + std::to_string(h) + "x" +
                         std::to_string(w) + "x" + std::to_string(d));
  }
}

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ContractError("grid time must lie in [0, 1]");
}

}  // namespace

LatentGrid::LatentGrid(int h, int w, int d, double t) : h_(h), w_(w), d_(d), t_(t) {
  check_dims(h, w, d);
  check_time(t);
  data_.assign(static_cast<std::size_t>(h) * w * d, 0.0f);
}

LatentGrid::LatentGrid(int h, int w, int d, std::vector<float> data, double t)
    : h_(h), w_(w), d_(d), t_(t), data_(std::move(data)) {
  check_dims(h, w, d);
  check_time(t);
  if (data_.size() != static_cast<std::size_t>(h) * w * d) {
    throw DimensionError("grid data length does not match h*w*d");
  }
  if (!all_finite()) throw ContractError("grid data contains non-finite values");
}

LatentGrid LatentGrid::filled(int h, int w, int d, float value, double t) {
  LatentGrid g(h, w, d, t);
  std::fill(g.data_.begin(), g.data_.end(), value);
  return g;
}

void LatentGrid::set_t(double t) {
  check_time(t);
  t_ = t;
}

bool LatentGrid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.h()) + "x" +
                         std::to_string(a.w()) + "x" + std::to_string(a.d()) + " vs " +
                         std::to_string(b.h()) + "x" + std::to_string(b.w()) + "x" +
                         std::to_string(b.d()));
  }
}

LatentGrid operator+(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b, "grid add");
  LatentGrid out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

LatentGrid operator-(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b, "grid subtract");
  LatentGrid out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

LatentGrid operator*(double s, const LatentGrid& a) {
  LatentGrid out = a;
  const float sf = static_cast<float>(s);
  for (float& v : out.data()) v *= sf;
  return out;
}

void axpy(double a, const LatentGrid& x, LatentGrid& y) {
  require_same_shape(x, y, "axpy");
  const float af = static_cast<float>(a);
  auto xv = x.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] += af * xv[i];
}

double l2_norm(const LatentGrid& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += static_cast<double>(v) * v;
  return std::sqrt(acc);
}

double max_abs_diff(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(av[i]) - bv[i]));
  }
  return m;
}

TimestepSchedule::TimestepSchedule(std::vector<double> ts) : ts_(std::move(ts)) {
  if (ts_.size() < 2) throw ContractError("schedule needs at least two times");
  if (ts_.front() != 0.0 || ts_.back() != 1.0) {
    throw ContractError("schedule must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < ts_.size(); ++i) {
    if (!(ts_[i] > ts_[i - 1])) throw ContractError("schedule must be strictly increasing");
  }
}

TimestepSchedule linear_schedule(int n) {
  if (n < 1) throw ContractError("linear_schedule requires N >= 1");
  std::vector<double> ts(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) ts[i] = static_cast<double>(i) / n;
  return TimestepSchedule(std::move(ts));
}

LatentGrid gaussian_noise(int h, int w, int d, SeededRng& rng) {
  LatentGrid g(h, w, d, 0.0);
  for (float& v : g.data()) v = static_cast<float>(rng.normal());
  return g;
}

}  // namespace pflow
