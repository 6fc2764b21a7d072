#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "previewflow/cost.hpp"
#include "previewflow/grid.hpp"
#include "previewflow/operators.hpp"
#include "previewflow/velocity.hpp"

namespace pflow {

/// How the downsampling operator is chosen at t_D.
enum class SelectionStrategy { Argmin, Argmax, Random, Nearest };

std::string to_string(SelectionStrategy s);
SelectionStrategy selection_strategy_from_string(const std::string& s);

/// Preview-generation knobs. Defaults follow the reference setup:
/// N = 30, D = 10, m = 5, alpha = 0.04, s = 2, k = 1.
struct PreviewConfig {
  int n = 30;
  /// Defaults to linear_schedule(n) when unset.
  std::optional<TimestepSchedule> schedule;
  int d = 10;
  int s = 2;
  int m = 5;
  double alpha = 0.04;
  int k = 1;
  std::uint64_t seed = 0;
  Condition condition;
  FamilyMode family_mode = FamilyMode::PerBlock;
  SelectionStrategy selection = SelectionStrategy::Argmin;
  bool guidance = true;
  /// Decorrelate duplicated sources of many-to-one operators (warps).
  bool decorrelate = true;
  CostModel cost_model = CostModel::Linear;

  TimestepSchedule timesteps() const;
  /// Throws ContractError / DivisibilityError for invalid settings on an
  /// h x w grid.
  void validate(int h, int w) const;
};

/// States x_{t_0..t_N} and velocities v(x_{t_i}, t_i) for i < N.
struct Trajectory {
  std::vector<LatentGrid> states;
  std::vector<LatentGrid> velocities;
};

struct HrRun {
  LatentGrid final;
  Trajectory trajectory;
  EvalLedger ledger;
};

/// Euler integration x_{i+1} = x_i + (t_{i+1} - t_i) v(x_i, t_i) at the
/// resolution of x0. Throws IntegrationError on a non-finite state.
HrRun sample_hr(const VelocityField& field, const TimestepSchedule& schedule, const LatentGrid& x0,
                std::span<const float> cond, bool keep_trajectory = false,
                int hr_positions = 0);

struct RunReport {
  std::string method;
  LatentGrid final;
  std::optional<int> selected;
  std::vector<double> candidate_norms;
  /// Commutator norm ||D* v(x_{t_D}) - v(D* x_{t_D})|| right after selection.
  std::optional<double> norm_at_td;
  /// ||D* v(x^HR_{t_{D+m}}) - v(x^lr_{t_{D+m}})|| against the paired
  /// full-resolution trajectory, measured before that step's guidance update.
  std::optional<double> norm_at_tdm;
  /// Guidance residual ||D* v(x_{t_D}) - v(x^lr_t)|| at t_D and t_{D+m}.
  std::optional<double> residual_at_td;
  std::optional<double> residual_at_tdm;
  /// Guided steps as executed (D..D+m inclusive) and the m-count of the prose
  /// description, reported side by side.
  int guided_steps = 0;
  int guided_steps_after_td = 0;
  EvalLedger ledger;
  CostModel cost_model = CostModel::Linear;
  /// ||x_final - D* x^HR_final|| and its value relative to ||D* x^HR_final||.
  std::optional<double> compliance_deviation;
  std::optional<double> compliance_relative;
  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> streams;
  double wall_ms = 0.0;

  double cost_units() const { return ledger.cost_units(cost_model); }
  nlohmann::ordered_json to_json(bool include_timing = true) const;
};

/// Preview generation: full-resolution Euler steps before D; at D the
/// full-resolution velocity is stored, the candidate family is built and the
/// operator chosen by `config.selection`; the latent is downsampled; steps
/// D..D+m get commutator-zero guidance before their Euler step; the rest run
/// plainly at low resolution. `paired` (a full-resolution run from the same
/// x0 with its trajectory) enables the t_{D+m} commutator and compliance
/// measurements. Diagnostic evaluations are not charged to the ledger.
RunReport sample_preview(const VelocityField& field, const PreviewConfig& config,
                         const LatentGrid& x0, const HrRun* paired = nullptr);

enum class BaselineKind { ReducedNfe, DirectLr, NaiveDown };

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& s);

struct BaselineParams {
  /// NFE for the reduced-NFE baseline; must be < config.n.
  int reduced_n = 20;
};

/// reduced-nfe: full resolution with fewer steps. direct-lr: whole run at low
/// resolution from the strided subsample of x0. naive-down: nearest
/// downsampling at t_D with no selection and no guidance.
RunReport sample_baseline(BaselineKind kind, const VelocityField& field,
                          const PreviewConfig& config, const LatentGrid& x0,
                          const BaselineParams& params = {}, const HrRun* paired = nullptr);

/// Like sample_preview, but the operator applied at step `t_m` is a
/// same-size manipulation (translation or warp). The guidance target is
/// apply(op, v(x_{t_M})). Warps get noise decorrelation when
/// config.decorrelate is set.
RunReport sample_manipulated(const VelocityField& field, const PreviewConfig& config,
                             const SelectionOperator& op, int t_m, const LatentGrid& x0,
                             const HrRun* paired = nullptr);

/// Replaces the noise component of every non-canonical duplicate output with
/// fresh noise: x += (1 - t) * (eps - x0_hat), x0_hat = x - t * v, where v is
/// the velocity gathered by the same operator.
void decorrelate_duplicates(const SelectionOperator& op, LatentGrid& x, const LatentGrid& v,
                            double t, SeededRng& rng);

}  // namespace pflow
