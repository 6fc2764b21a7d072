#pragma once

#include <array>
#include <vector>

#include "previewflow/grid.hpp"
#include "previewflow/rng.hpp"
#include "previewflow/velocity.hpp"

namespace pflow {

struct Blob {
  double cy;      // center, relative to image height, in [0, 1]
  double cx;      // center, relative to image width
  double radius;  // relative to min(h, w)
  int color;      // palette index
};

struct BlobSample {
  std::vector<Blob> blobs;
  Condition condition;
};

/// Synthetic conditional image distribution: a few soft-edged colored disks
/// over a vertical background gradient. Geometry is resolution independent,
/// so the same sample renders consistently at any grid size. The condition
/// vector holds, per palette color, the fraction of blobs of that color.
class BlobDataset {
 public:
  static constexpr int kPalette = 4;
  static constexpr int kMaxBlobs = 3;

  explicit BlobDataset(int channels = 3);

  int channels() const { return channels_; }
  int condition_arity() const { return kPalette; }

  BlobSample sample(SeededRng& rng) const;
  /// Pixel values in [0, 1].
  LatentGrid render(const BlobSample& sample, int h, int w) const;
  /// Maps [0, 1] images to the model's data space [-1, 1] (t = 1).
  static LatentGrid to_model_space(const LatentGrid& image);

  /// Draws only the condition of a fresh sample (the sampler's "prompt").
  Condition sample_condition(SeededRng& rng) const { return sample(rng).condition; }

 private:
  int channels_;
  std::array<std::array<float, 3>, kPalette> palette_;
};

/// Model space [-1, 1] -> image space [0, 1], clamped.
LatentGrid to_image(const LatentGrid& model_space);

}  // namespace pflow
