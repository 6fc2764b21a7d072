#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "previewflow/grid.hpp"
#include "previewflow/rng.hpp"

namespace pflow {

enum class OperatorKind { Downsample, NearestDown, Translate, Warp };

std::string to_string(OperatorKind kind);

struct GridIndex {
  int y = 0;
  int x = 0;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

/// Row-selection linear operator: every output position copies all channels
/// of exactly one input position. As a matrix it has a single 1 per row.
class SelectionOperator {
 public:
  /// `sources[o]` is the flat input position (y * in_w + x) read by output o.
  /// Throws ContractError if any source lies outside the input.
  SelectionOperator(OperatorKind kind, int in_h, int in_w, int out_h, int out_w, int scale,
                    std::vector<std::int32_t> sources, std::uint64_t stream_id = 0);

  OperatorKind kind() const { return kind_; }
  int in_h() const { return in_h_; }
  int in_w() const { return in_w_; }
  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }
  int scale() const { return scale_; }
  std::uint64_t stream_id() const { return stream_id_; }
  const std::vector<std::int32_t>& sources() const { return sources_; }
  GridIndex source(int oy, int ox) const;

  /// Groups of output positions (flat, ascending) that share one source.
  /// Empty for injective operators.
  const std::vector<std::vector<std::int32_t>>& duplication_map() const { return duplicates_; }
  /// Outputs beyond the first in each duplicated group.
  int duplication_count() const;
  /// Many-to-one operators copy the same noise into several positions and
  /// need decorrelation when applied mid-trajectory.
  bool needs_decorrelation() const { return !duplicates_.empty(); }

  /// Gathers x into the output grid; d and t are carried over.
  LatentGrid apply(const LatentGrid& x) const;

  /// Explicit (out_h*out_w) x (in_h*in_w) 0/1 matrix, row-major. Test oracle.
  std::vector<float> dense_matrix() const;

  nlohmann::ordered_json to_json() const;

 private:
  OperatorKind kind_;
  int in_h_;
  int in_w_;
  int out_h_;
  int out_w_;
  int scale_;
  std::vector<std::int32_t> sources_;
  std::vector<std::vector<std::int32_t>> duplicates_;
  std::uint64_t stream_id_;
};

/// How candidate offsets vary over blocks.
enum class FamilyMode {
  PerBlock,  // independent uniform permutation in every s x s block
  Shared,    // one permutation reused by every block
  Identity,  // candidate k takes offset k everywhere (test hook)
};

std::string to_string(FamilyMode mode);
FamilyMode family_mode_from_string(const std::string& s);

/// The s^2 mutually exclusive downsampling candidates. Within every block the
/// candidates' sources partition the block's s^2 positions.
struct OperatorFamily {
  int scale = 0;
  FamilyMode mode = FamilyMode::PerBlock;
  std::vector<SelectionOperator> candidates;
  /// permutations[b][k]: in-block offset (row-major within the block) used by
  /// candidate k in block b (blocks row-major).
  std::vector<std::vector<std::uint8_t>> permutations;
};

/// Throws DivisibilityError unless s divides h and w, ContractError if s < 2.
OperatorFamily build_family(int h, int w, int s, SeededRng& rng,
                            FamilyMode mode = FamilyMode::PerBlock);

/// Every output sourced at its block's top-left corner.
SelectionOperator nearest_operator(int h, int w, int s);

/// Cyclic shift: output (y, x) reads input ((y - dy) mod h, (x - dx) mod w),
/// so content moves by (+dy, +dx).
SelectionOperator translate_operator(int h, int w, int dy, int dx);

/// Same-size operator from an explicit source map (one entry per output,
/// row-major). Throws ContractError on out-of-bounds sources.
SelectionOperator warp_operator(int h, int w, const std::vector<GridIndex>& index_map);

}  // namespace pflow
