#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "previewflow/dataset.hpp"
#include "previewflow/sampler.hpp"
#include "previewflow/studies.hpp"
#include "previewflow/toy_net.hpp"
#include "previewflow/training.hpp"

namespace pflow {

inline constexpr int kSchemaVersion = 1;

/// Where the velocity field comes from. Kinds: toy-net (checkpoint),
/// analytic-blur, analytic-channel-affine, gaussian-oracle.
struct FieldSpec {
  std::string kind = "toy-net";
  std::string checkpoint = "checkpoint.ckpt";
  std::string padding = "reflect";
  double gain = 1.0;
  /// Channel-affine: v = scale * x + bias.
  double scale = -0.5;
  double bias = 0.0;
  double mean = 0.0;
  double std = 0.5;

  nlohmann::ordered_json to_json() const;
  static FieldSpec from_json(const nlohmann::json& j);
};

struct AblateSpec {
  std::string axis = "selection";
  std::vector<int> m_values = {3, 4, 5, 6, 7};
  std::vector<double> alpha_values = {0.01, 0.02, 0.03, 0.04, 0.05, 0.06};
  std::vector<int> k_values = {1, 2, 3};

  nlohmann::ordered_json to_json() const;
  static AblateSpec from_json(const nlohmann::json& j);
};

struct StatsSpec {
  /// "cg" (commutator norms with and without guidance) or "cosine".
  std::string study = "cg";
  int span = 5;

  nlohmann::ordered_json to_json() const;
  static StatsSpec from_json(const nlohmann::json& j);
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string command;
  FieldSpec field;
  GridShape grid;
  PreviewConfig preview;
  std::vector<std::string> baselines;
  int reduced_n = 20;
  std::vector<std::uint64_t> seeds = {0};
  std::string out = "out";
  bool export_images = false;
  ToyNetConfig architecture;
  TrainConfig train;
  AblateSpec ablate;
  StatsSpec stats;
  /// compare: run directories; the first one supplies the reference.
  std::vector<std::string> runs;

  /// Every field, defaults included.
  nlohmann::ordered_json to_json() const;
  /// Rejects unknown keys and a missing or unsupported schema_version.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// "1,2,5-9" -> {1, 2, 5, 6, 7, 8, 9}.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Process exit code for an exception: 1 usage/schema, 2 runtime, 3 I/O.
int exit_code_for(const std::exception& e);

/// Resolves the field; toy-net checkpoints are read relative to `base`.
std::shared_ptr<VelocityField> make_field(const FieldSpec& spec, const std::filesystem::path& base);

/// Methods a preview run produces: "ours" plus the configured baselines.
std::vector<MethodSpec> preview_methods(const ExperimentConfig& cfg);

struct CommandResult {
  std::vector<std::filesystem::path> written;
};

CommandResult cmd_train(const ExperimentConfig& cfg);
CommandResult cmd_preview(const ExperimentConfig& cfg);
CommandResult cmd_compare(const ExperimentConfig& cfg);
CommandResult cmd_ablate(const ExperimentConfig& cfg);
CommandResult cmd_stats(const ExperimentConfig& cfg);

CommandResult run_command(const ExperimentConfig& cfg);

}  // namespace pflow
