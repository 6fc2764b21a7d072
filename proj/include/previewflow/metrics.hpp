#pragma once

#include <span>
#include <string>
#include <vector>

#include "previewflow/grid.hpp"
#include "previewflow/sampler.hpp"
#include "previewflow/velocity.hpp"

namespace pflow {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(i_max^2 / MSE) over all entries; kPsnrCap when MSE = 0.
double psnr(const LatentGrid& a, const LatentGrid& b, double i_max);
double mse(const LatentGrid& a, const LatentGrid& b);

/// s x s block average (area resize). s must divide h and w.
LatentGrid area_downsample(const LatentGrid& img, int s);

/// Channel mean, for single-channel metrics.
LatentGrid to_gray(const LatentGrid& img);

struct PiqeParams {
  int block = 8;
  /// Blocks whose MSCN variance exceeds this are spatially active.
  double activity_threshold = 0.1;
  /// Edge segments with std below this mark a noticeable distortion.
  double edge_threshold = 0.1;
  int segment = 6;
  double c1 = 1.0;
  /// MSCN stabilizer and the scale the image is mapped to before MSCN.
  double mscn_c = 1.0;
  double pixel_scale = 255.0;
};

struct PiqeReport {
  double score = 0.0;
  int active_blocks = 0;
  int noticeable_blocks = 0;
  int noise_blocks = 0;
  int total_blocks = 0;
};

/// No-reference blockwise distortion score (lower is better) of an image in
/// [0, 1]. Multi-channel images are converted to gray first.
PiqeReport piqe_report(const LatentGrid& img, const PiqeParams& params = {});
double piqe(const LatentGrid& img, int block = 8);

/// MSCN coefficients of a gray image at `pixel_scale` (7x7 Gaussian window).
std::vector<double> mscn(const LatentGrid& gray, const PiqeParams& params = {});

/// Cosine similarity of flattened grids (0 if either is zero).
double cosine_similarity(const LatentGrid& a, const LatentGrid& b);

struct CosinePoint {
  int k = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

/// For k = 1..span: cosine similarity between v(x_{t_D}, t_D) and
/// v(x_{t_{D+k}}, t_{D+k}) along each retained trajectory, summarized over
/// trajectories. Throws ContractError if D + span exceeds a trajectory.
std::vector<CosinePoint> cosine_trace(std::span<const Trajectory> trajectories, int d, int span);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};
/// Sample mean and (n-1) standard deviation, accumulated in order.
MeanStd mean_std(std::span<const double> values);

}  // namespace pflow
