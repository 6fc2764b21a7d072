#include "previewflow/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "previewflow/error.hpp"

namespace pflow {

double mse(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b, "mse");
  double acc = 0.0;
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double r = static_cast<double>(av[i]) - bv[i];
    acc += r * r;
  }
  return acc / static_cast<double>(av.size());
}

double psnr(const LatentGrid& a, const LatentGrid& b, double i_max) {
  if (!(i_max > 0.0)) throw ContractError("psnr: i_max must be > 0");
  const double e = mse(a, b);
  if (e == 0.0) return kPsnrCap;
  return 10.0 * std::log10(i_max * i_max / e);
}

LatentGrid area_downsample(const LatentGrid& img, int s) {
  if (s < 1 || img.h() % s != 0 || img.w() % s != 0) {
    throw DivisibilityError("area_downsample: scale must divide the image");
  }
  LatentGrid out(img.h() / s, img.w() / s, img.d(), img.t());
  const double inv = 1.0 / (static_cast<double>(s) * s);
  for (int y = 0; y < out.h(); ++y) {
    for (int x = 0; x < out.w(); ++x) {
      for (int c = 0; c < img.d(); ++c) {
        double acc = 0.0;
        for (int dy = 0; dy < s; ++dy) {
          for (int dx = 0; dx < s; ++dx) acc += img.at(y * s + dy, x * s + dx, c);
        }
        out.at(y, x, c) = static_cast<float>(acc * inv);
      }
    }
  }
  return out;
}

LatentGrid to_gray(const LatentGrid& img) {
  if (img.d() == 1) return img;
  LatentGrid out(img.h(), img.w(), 1, img.t());
  for (int y = 0; y < img.h(); ++y) {
    for (int x = 0; x < img.w(); ++x) {
      double acc = 0.0;
      for (int c = 0; c < img.d(); ++c) acc += img.at(y, x, c);
      out.at(y, x, 0) = static_cast<float>(acc / img.d());
    }
  }
  return out;
}

double cosine_similarity(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b, "cosine_similarity");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += static_cast<double>(av[i]) * bv[i];
    na += static_cast<double>(av[i]) * av[i];
    nb += static_cast<double>(bv[i]) * bv[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

std::vector<CosinePoint> cosine_trace(std::span<const Trajectory> trajectories, int d, int span) {
  if (trajectories.empty()) throw ContractError("cosine_trace: no trajectories");
  if (d < 0 || span < 1) throw ContractError("cosine_trace: invalid step or span");
  for (const auto& tr : trajectories) {
    if (static_cast<std::size_t>(d + span) >= tr.velocities.size()) {
      throw ContractError("cosine_trace: span extends beyond the trajectory");
    }
  }
  std::vector<CosinePoint> out;
  for (int k = 1; k <= span; ++k) {
    std::vector<double> sims;
    for (const auto& tr : trajectories) {
      sims.push_back(cosine_similarity(tr.velocities[d], tr.velocities[d + k]));
    }
    const MeanStd ms = mean_std(sims);
    out.push_back({k, ms.mean, ms.stddev});
  }
  return out;
}

}  // namespace pflow
