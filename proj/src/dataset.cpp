#include "previewflow/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "previewflow/error.hpp"

namespace pflow {

BlobDataset::BlobDataset(int channels) : channels_(channels) {
  if (channels != 1 && channels != 3) throw DimensionError("blob dataset supports 1 or 3 channels");
  palette_ = {{{0.90f, 0.25f, 0.20f},
               {0.20f, 0.75f, 0.30f},
               {0.25f, 0.35f, 0.90f},
               {0.95f, 0.85f, 0.25f}}};
}

BlobSample BlobDataset::sample(SeededRng& rng) const {
  BlobSample s;
  const int count = 1 + static_cast<int>(rng.below(kMaxBlobs));
  s.condition.assign(kPalette, 0.0f);
  for (int i = 0; i < count; ++i) {
    Blob b;
    b.cy = 0.2 + 0.6 * rng.uniform();
    b.cx = 0.2 + 0.6 * rng.uniform();
    b.radius = 0.14 + 0.14 * rng.uniform();
    b.color = static_cast<int>(rng.below(kPalette));
    s.condition[b.color] += 1.0f / kMaxBlobs;
    s.blobs.push_back(b);
  }
  return s;
}

LatentGrid BlobDataset::render(const BlobSample& sample, int h, int w) const {
  LatentGrid img(h, w, channels_, 1.0);
  // Edge softness of about one pixel at 16x16.
  const double soft = 0.07;
  for (int y = 0; y < h; ++y) {
    const double ry = (y + 0.5) / h;
    for (int x = 0; x < w; ++x) {
      const double rx = (x + 0.5) / w;
      std::array<double, 3> rgb = {0.10 + 0.15 * ry, 0.12 + 0.10 * ry, 0.20 + 0.05 * ry};
      for (const Blob& b : sample.blobs) {
        const double dist = std::hypot(ry - b.cy, rx - b.cx);
        const double alpha = std::clamp((b.radius - dist) / soft + 0.5, 0.0, 1.0);
        for (int c = 0; c < 3; ++c) rgb[c] = (1.0 - alpha) * rgb[c] + alpha * palette_[b.color][c];
      }
      if (channels_ == 1) {
        img.at(y, x, 0) = static_cast<float>((rgb[0] + rgb[1] + rgb[2]) / 3.0);
      } else {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(rgb[c]);
      }
    }
  }
  return img;
}

LatentGrid BlobDataset::to_model_space(const LatentGrid& image) {
  LatentGrid out = image;
  for (float& v : out.data()) v = 2.0f * v - 1.0f;
  out.set_t(1.0);
  return out;
}

LatentGrid to_image(const LatentGrid& model_space) {
  LatentGrid out = model_space;
  for (float& v : out.data()) v = std::clamp(0.5f * (v + 1.0f), 0.0f, 1.0f);
  return out;
}

}  // namespace pflow
