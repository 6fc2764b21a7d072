#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "previewflow/grid.hpp"
#include "previewflow/rng.hpp"
#include "previewflow/velocity.hpp"

namespace pflow {

/// Architecture of the toy conditional velocity network: a stack of 3x3
/// (dilated) convolutions with SiLU between them. Each pixel's input is its
/// latent channels, two normalized coordinate channels, a time embedding and
/// the broadcast condition vector. The coordinate channels make the network
/// position-aware, so it does not commute with spatial subsampling.
struct ToyNetConfig {
  int channels = 3;
  int condition_arity = 4;
  int time_features = 4;
  bool coordinate_channels = true;
  std::vector<int> hidden = {24, 24, 24};
  /// One per layer: hidden.size() + 1 entries.
  std::vector<int> dilations = {1, 2, 4, 1};

  int input_channels() const;
  int layers() const { return static_cast<int>(hidden.size()) + 1; }
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ToyNetConfig from_json(const nlohmann::json& j);
};

inline constexpr std::size_t kMaxToyParameters = 500'000;

class ToyNet {
 public:
  ToyNet(ToyNetConfig config, std::vector<float> params);

  /// He-style random init from `rng`.
  static ToyNet initialize(const ToyNetConfig& config, SeededRng& rng);
  static std::size_t parameter_count(const ToyNetConfig& config);

  const ToyNetConfig& config() const { return config_; }
  std::span<const float> params() const { return params_; }
  std::span<float> mutable_params() { return params_; }

  /// Evaluates the network with parameters `params` (which may differ from
  /// the stored ones, e.g. in double precision for gradient checks).
  template <typename T>
  std::vector<T> forward(std::span<const T> params, const LatentGrid& x, double t,
                         std::span<const float> cond) const;

  /// Mean squared error against `target` for one sample. When `grad` is
  /// non-empty, adds `grad_scale * dLoss/dparams` into it.
  template <typename T>
  double loss_and_grad(std::span<const T> params, const LatentGrid& x, double t,
                       std::span<const float> cond, const LatentGrid& target, std::span<T> grad,
                       double grad_scale = 1.0) const;

  // Checkpoint: "PFLOWCKPT\n", one line of JSON header, raw little-endian
  // float32 weights.
  void save(const std::filesystem::path& path, const nlohmann::ordered_json& training,
            std::uint64_t seed) const;
  static ToyNet load(const std::filesystem::path& path, nlohmann::json* header = nullptr);

 private:
  struct LayerView {
    int cin;
    int cout;
    int dilation;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  template <typename T>
  std::vector<T> build_input(const LatentGrid& x, double t, std::span<const float> cond) const;

  ToyNetConfig config_;
  std::vector<float> params_;
  std::vector<LayerView> layers_;
};

/// Adapts a ToyNet to the VelocityField interface.
class ToyNetField final : public VelocityField {
 public:
  explicit ToyNetField(std::shared_ptr<const ToyNet> net);

  FieldKind kind() const override { return FieldKind::ToyNet; }
  int condition_arity() const override { return net_->config().condition_arity; }
  const ToyNet& net() const { return *net_; }
  std::shared_ptr<const ToyNet> shared_net() const { return net_; }

 protected:
  void evaluate(const LatentGrid& x, double t, std::span<const float> cond,
                LatentGrid& out) const override;

 private:
  std::shared_ptr<const ToyNet> net_;
};

}  // namespace pflow
