#include "previewflow/operators.hpp"

#include <algorithm>
#include <map>

#include "previewflow/error.hpp"
#include "previewflow/kernels.hpp"

namespace pflow {

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Downsample: return "downsample";
    case OperatorKind::NearestDown: return "nearest-down";
    case OperatorKind::Translate: return "translate";
    case OperatorKind::Warp: return "warp";
  }
  return "unknown";
}

std::string to_string(FamilyMode mode) {
  switch (mode) {
    case FamilyMode::PerBlock: return "per-block";
    case FamilyMode::Shared: return "shared";
    case FamilyMode::Identity: return "identity";
  }
  return "unknown";
}

FamilyMode family_mode_from_string(const std::string& s) {
  if (s == "per-block") return FamilyMode::PerBlock;
  if (s == "shared") return FamilyMode::Shared;
  if (s == "identity") return FamilyMode::Identity;
  throw ConfigError("unknown family mode '" + s + "'");
}

SelectionOperator::SelectionOperator(OperatorKind kind, int in_h, int in_w, int out_h, int out_w,
                                     int scale, std::vector<std::int32_t> sources,
                                     std::uint64_t stream_id)
    : kind_(kind),
      in_h_(in_h),
      in_w_(in_w),
      out_h_(out_h),
      out_w_(out_w),
      scale_(scale),
      sources_(std::move(sources)),
      stream_id_(stream_id) {
  if (in_h < 1 || in_w < 1 || out_h < 1 || out_w < 1) {
    throw DimensionError("selection operator dimensions must be >= 1");
  }
  if (sources_.size() != static_cast<std::size_t>(out_h) * out_w) {
    throw DimensionError("selection operator needs one source per output position");
  }
  const std::int32_t limit = in_h * in_w;
  for (std::int32_t s : sources_) {
    if (s < 0 || s >= limit) throw ContractError("selection operator source out of bounds");
  }
  std::map<std::int32_t, std::vector<std::int32_t>> by_source;
  for (std::size_t o = 0; o < sources_.size(); ++o) {
    by_source[sources_[o]].push_back(static_cast<std::int32_t>(o));
  }
  for (auto& [src, outs] : by_source) {
    if (outs.size() > 1) duplicates_.push_back(std::move(outs));
  }
  std::sort(duplicates_.begin(), duplicates_.end());
}

GridIndex SelectionOperator::source(int oy, int ox) const {
  const std::int32_t s = sources_[static_cast<std::size_t>(oy) * out_w_ + ox];
  return {s / in_w_, s % in_w_};
}

int SelectionOperator::duplication_count() const {
  int n = 0;
  for (const auto& g : duplicates_) n += static_cast<int>(g.size()) - 1;
  return n;
}

LatentGrid SelectionOperator::apply(const LatentGrid& x) const {
  if (x.h() != in_h_ || x.w() != in_w_) {
    throw DimensionError("selection operator expects " + std::to_string(in_h_) + "x" +
                         std::to_string(in_w_) + " input, got " + std::to_string(x.h()) + "x" +
                         std::to_string(x.w()));
  }
  LatentGrid out(out_h_, out_w_, x.d(), x.t());
  kernels::gather_rows(x.data(), x.d(), sources_, out.data());
  return out;
}

std::vector<float> SelectionOperator::dense_matrix() const {
  const std::size_t cols = static_cast<std::size_t>(in_h_) * in_w_;
  std::vector<float> m(sources_.size() * cols, 0.0f);
  for (std::size_t o = 0; o < sources_.size(); ++o) m[o * cols + sources_[o]] = 1.0f;
  return m;
}

nlohmann::ordered_json SelectionOperator::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = to_string(kind_);
  j["s"] = scale_;
  j["in_dims"] = {in_h_, in_w_};
  j["out_dims"] = {out_h_, out_w_};
  j["sources"] = sources_;
  j["duplication_map"] = duplicates_;
  j["rng_stream"] = stream_id_;
  return j;
}

namespace {

void check_divisible(int h, int w, int s) {
  if (s < 1) throw ContractError("scale must be >= 1");
  if (h % s != 0 || w % s != 0) {
    throw DivisibilityError("scale " + std::to_string(s) + " does not divide grid " +
                            std::to_string(h) + "x" + std::to_string(w));
  }
}

std::vector<std::uint8_t> random_permutation(int n, SeededRng& rng) {
  std::vector<std::uint8_t> p(n);
  for (int i = 0; i < n; ++i) p[i] = static_cast<std::uint8_t>(i);
  // Fisher-Yates with the counter-based stream.
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

}  // namespace

OperatorFamily build_family(int h, int w, int s, SeededRng& rng, FamilyMode mode) {
  if (s < 2) throw ContractError("downsampling family needs s >= 2");
  check_divisible(h, w, s);
  if (s * s > 256) throw ContractError("scale too large for block permutations");
  const int bh = h / s;
  const int bw = w / s;
  const int k_count = s * s;

  OperatorFamily family;
  family.scale = s;
  family.mode = mode;
  family.permutations.resize(static_cast<std::size_t>(bh) * bw);
  std::vector<std::uint8_t> shared;
  if (mode == FamilyMode::Shared) shared = random_permutation(k_count, rng);
  for (auto& perm : family.permutations) {
    switch (mode) {
      case FamilyMode::PerBlock: perm = random_permutation(k_count, rng); break;
      case FamilyMode::Shared: perm = shared; break;
      case FamilyMode::Identity:
        perm.resize(k_count);
        for (int k = 0; k < k_count; ++k) perm[k] = static_cast<std::uint8_t>(k);
        break;
    }
  }
  for (int k = 0; k < k_count; ++k) {
    std::vector<std::int32_t> sources(static_cast<std::size_t>(bh) * bw);
    for (int by = 0; by < bh; ++by) {
      for (int bx = 0; bx < bw; ++bx) {
        const int b = by * bw + bx;
        const int offset = family.permutations[b][k];
        const int y = by * s + offset / s;
        const int x = bx * s + offset % s;
        sources[b] = y * w + x;
      }
    }
    family.candidates.emplace_back(OperatorKind::Downsample, h, w, bh, bw, s, std::move(sources),
                                   rng.stream());
  }
  return family;
}

SelectionOperator nearest_operator(int h, int w, int s) {
  check_divisible(h, w, s);
  const int oh = h / s;
  const int ow = w / s;
  std::vector<std::int32_t> sources(static_cast<std::size_t>(oh) * ow);
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) sources[i * ow + j] = (i * s) * w + j * s;
  }
  return SelectionOperator(OperatorKind::NearestDown, h, w, oh, ow, s, std::move(sources));
}

SelectionOperator translate_operator(int h, int w, int dy, int dx) {
  std::vector<std::int32_t> sources(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sy = (((y - dy) % h) + h) % h;
      const int sx = (((x - dx) % w) + w) % w;
      sources[y * w + x] = sy * w + sx;
    }
  }
  return SelectionOperator(OperatorKind::Translate, h, w, h, w, 1, std::move(sources));
}

SelectionOperator warp_operator(int h, int w, const std::vector<GridIndex>& index_map) {
  if (index_map.size() != static_cast<std::size_t>(h) * w) {
    throw DimensionError("warp map needs one source per output position");
  }
  std::vector<std::int32_t> sources(index_map.size());
  for (std::size_t o = 0; o < index_map.size(); ++o) {
    const auto& g = index_map[o];
    if (g.y < 0 || g.y >= h || g.x < 0 || g.x >= w) {
      throw ContractError("warp source out of bounds at output " + std::to_string(o));
    }
    sources[o] = g.y * w + g.x;
  }
  return SelectionOperator(OperatorKind::Warp, h, w, h, w, 1, std::move(sources),
                           streams::kWarpNoise);
}

}  // namespace pflow
