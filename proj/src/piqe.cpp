#include <algorithm>
#include <cmath>
#include <vector>

#include "previewflow/error.hpp"
#include "previewflow/metrics.hpp"

namespace pflow {

namespace {

constexpr int kWindow = 7;
constexpr double kWindowSigma = 7.0 / 6.0;

std::vector<double> gaussian_taps() {
  std::vector<double> taps(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double r = i - kWindow / 2;
    taps[i] = std::exp(-r * r / (2.0 * kWindowSigma * kWindowSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable Gaussian filter with replicated borders.
std::vector<double> gaussian_filter(const std::vector<double>& img, int h, int w) {
  static const std::vector<double> taps = gaussian_taps();
  const int r = kWindow / 2;
  std::vector<double> tmp(img.size());
  std::vector<double> out(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int sx = std::clamp(x + k, 0, w - 1);
        acc += taps[k + r] * img[static_cast<std::size_t>(y) * w + sx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int sy = std::clamp(y + k, 0, h - 1);
        acc += taps[k + r] * tmp[static_cast<std::size_t>(sy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

double sample_std(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

}  // namespace

std::vector<double> mscn(const LatentGrid& gray, const PiqeParams& params) {
  if (gray.d() != 1) throw DimensionError("mscn expects a single-channel image");
  const int h = gray.h();
  const int w = gray.w();
  std::vector<double> img(gray.size());
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = gray.data()[i] * params.pixel_scale;
  std::vector<double> sq(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) sq[i] = img[i] * img[i];
  const auto mu = gaussian_filter(img, h, w);
  const auto mu_sq = gaussian_filter(sq, h, w);
  std::vector<double> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double sigma = std::sqrt(std::abs(mu_sq[i] - mu[i] * mu[i]));
    out[i] = (img[i] - mu[i]) / (sigma + params.mscn_c);
  }
  return out;
}

PiqeReport piqe_report(const LatentGrid& img, const PiqeParams& params) {
  const int b = params.block;
  if (b < 2 || params.segment < 2 || params.segment > b) {
    throw ContractError("piqe: invalid block/segment size");
  }
  if (img.h() < b || img.w() < b) throw DimensionError("piqe: image smaller than one block");
  const LatentGrid gray = to_gray(img);
  const auto coeffs = mscn(gray, params);
  const int w = gray.w();
  const int bh = gray.h() / b;
  const int bw = gray.w() / b;

  PiqeReport report;
  report.total_blocks = bh * bw;
  double distortion = 0.0;
  auto at = [&](int y, int x) { return coeffs[static_cast<std::size_t>(y) * w + x]; };

  for (int by = 0; by < bh; ++by) {
    for (int bx = 0; bx < bw; ++bx) {
      const int y0 = by * b;
      const int x0 = bx * b;
      std::vector<double> block;
      block.reserve(static_cast<std::size_t>(b) * b);
      for (int y = 0; y < b; ++y) {
        for (int x = 0; x < b; ++x) block.push_back(at(y0 + y, x0 + x));
      }
      const double var = sample_variance(block);
      if (!(var > params.activity_threshold)) continue;
      ++report.active_blocks;

      // Noticeable distortion: some segment of a block edge is nearly flat.
      bool noticeable = false;
      for (int edge = 0; edge < 4 && !noticeable; ++edge) {
        std::vector<double> line(b);
        for (int i = 0; i < b; ++i) {
          switch (edge) {
            case 0: line[i] = at(y0, x0 + i); break;
            case 1: line[i] = at(y0 + i, x0 + b - 1); break;
            case 2: line[i] = at(y0 + b - 1, x0 + i); break;
            default: line[i] = at(y0 + i, x0); break;
          }
        }
        for (int s = 0; s + params.segment <= b; ++s) {
          std::vector<double> seg(line.begin() + s, line.begin() + s + params.segment);
          if (sample_std(seg) < params.edge_threshold) {
            noticeable = true;
            break;
          }
        }
      }

      // Noise: the two center columns deviate like the surround does.
      std::vector<double> center;
      std::vector<double> surround;
      const int c0 = (b - 1) / 2;
      for (int y = 0; y < b; ++y) {
        for (int x = 0; x < b; ++x) {
          (x == c0 || x == c0 + 1 ? center : surround).push_back(at(y0 + y, x0 + x));
        }
      }
      const double s_cen = sample_std(center);
      const double s_sur = sample_std(surround);
      const double top = std::max(s_cen, s_sur);
      const double beta = top > 0.0 ? std::abs(s_cen - s_sur) / top : 1.0;
      const bool noisy = std::sqrt(var) > 2.0 * beta;

      // A flat edge counts one unit; noise grows with block variance.
      if (noticeable) {
        distortion += 1.0;
        ++report.noticeable_blocks;
      }
      if (noisy) {
        distortion += var / params.activity_threshold;
        ++report.noise_blocks;
      }
    }
  }
  report.score = (distortion + params.c1) / (report.active_blocks + params.c1);
  return report;
}

double piqe(const LatentGrid& img, int block) {
  PiqeParams p;
  p.block = block;
  p.segment = std::min(p.segment, block);
  return piqe_report(img, p).score;
}

}  // namespace pflow
