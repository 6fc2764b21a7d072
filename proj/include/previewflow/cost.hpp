#pragma once

#include <string>

namespace pflow {

/// Cost of one field evaluation as a function of its pixel count relative to
/// a full-resolution evaluation: Linear charges (p/P), Quadratic (p/P)^2
/// (attention-style token cost).
enum class CostModel { Linear, Quadratic };

std::string to_string(CostModel model);
CostModel cost_model_from_string(const std::string& s);

/// Relative cost of an evaluation on 1/s^2 of the pixels.
double lr_eval_cost(int s, CostModel model);

/// Counts field evaluations by resolution. `hr_positions` is the pixel count
/// of the full-resolution grid.
class EvalLedger {
 public:
  EvalLedger() = default;
  explicit EvalLedger(int hr_positions) : hr_positions_(hr_positions) {}

  /// Charges one evaluation on a grid with `positions` pixels.
  void charge(int positions);
  void charge_hr(int count = 1) { hr_evals_ += count; }

  int hr_evals() const { return hr_evals_; }
  int lr_evals() const { return lr_evals_; }
  int hr_positions() const { return hr_positions_; }
  int lr_positions() const { return lr_positions_; }

  /// Total cost in full-resolution evaluation units.
  double cost_units(CostModel model) const;

 private:
  int hr_positions_ = 0;
  int lr_positions_ = 0;
  int hr_evals_ = 0;
  int lr_evals_ = 0;
};

/// Closed-form evaluation counts of preview generation with guidance on
/// steps D..D+m (inclusive), k inner iterations, plus one Euler evaluation
/// per step.
struct PreviewEvalCount {
  int hr_evals;
  int lr_evals;
};
PreviewEvalCount preview_eval_count(int n, int d, int m, int s, int k, bool guidance = true);

double preview_cost(int n, int d, int m, int s, int k, CostModel model, bool guidance = true);

/// Full-resolution NFE divided by the modeled preview cost.
double preview_speedup(int n, int d, int m, int s, int k, CostModel model);

}  // namespace pflow
