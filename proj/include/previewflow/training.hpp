#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <json.hpp>

#include "previewflow/dataset.hpp"
#include "previewflow/grid.hpp"
#include "previewflow/toy_net.hpp"
#include "previewflow/velocity.hpp"

namespace pflow {

/// Conditional flow-matching target x1 - x0 (constant along the straight path).
LatentGrid cfm_target(const LatentGrid& x0, const LatentGrid& x1);

/// Mean over all entries of (v((1-t) x0 + t x1, t) - (x1 - x0))^2.
double cfm_loss(const VelocityField& field, const LatentGrid& x0, const LatentGrid& x1, double t,
                std::span<const float> cond = {});

/// Max relative error |analytic - fd| / (|fd| + 1e-8) over `probes` randomly
/// chosen parameters, central differences with step 1e-3, computed in double
/// precision on one random sample. Throws ContractError for non-network fields.
double grad_check(const VelocityField& field, int probes, SeededRng& rng, int size = 8);

struct TrainConfig {
  int steps = 2000;
  double lr = 0.05;
  double momentum = 0.9;
  double clip_norm = 1.0;
  /// Samples per step at each resolution; LR samples keep the model usable on
  /// downsampled grids.
  int batch_hr = 8;
  int batch_lr = 8;
  int hr_size = 16;
  int lr_size = 8;
  int probe_samples = 64;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  std::shared_ptr<ToyNet> net;
  /// Mean batch loss of every step.
  std::vector<double> loss_trace;
  /// Loss on a fixed probe batch before and after training.
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double seconds = 0.0;
};

using TrainObserver = std::function<void(int step, double loss)>;

/// Momentum SGD on the conditional flow-matching objective with global
/// gradient-norm clipping. Throws TrainingError on a non-finite loss.
TrainResult train_toy(const BlobDataset& dataset, const ToyNetConfig& arch, const TrainConfig& cfg,
                      const TrainObserver& observer = {});

/// Fixed evaluation batch loss for a network.
double probe_loss(const ToyNet& net, const BlobDataset& dataset, const TrainConfig& cfg);

}  // namespace pflow
