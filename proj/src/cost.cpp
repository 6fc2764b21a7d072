#include "previewflow/cost.hpp"

#include <cmath>

#include "previewflow/error.hpp"

namespace pflow {

std::string to_string(CostModel model) {
  return model == CostModel::Linear ? "linear" : "quadratic";
}

CostModel cost_model_from_string(const std::string& s) {
  if (s == "linear") return CostModel::Linear;
  if (s == "quadratic") return CostModel::Quadratic;
  throw ConfigError("unknown cost model '" + s + "'");
}

double lr_eval_cost(int s, CostModel model) {
  const double frac = 1.0 / (static_cast<double>(s) * s);
  return model == CostModel::Linear ? frac : frac * frac;
}

void EvalLedger::charge(int positions) {
  if (positions == hr_positions_) {
    ++hr_evals_;
    return;
  }
  if (lr_positions_ != 0 && lr_positions_ != positions) {
    throw ContractError("eval ledger: more than two resolutions in one run");
  }
  lr_positions_ = positions;
  ++lr_evals_;
}

double EvalLedger::cost_units(CostModel model) const {
  double cost = hr_evals_;
  if (lr_evals_ > 0) {
    const double frac = static_cast<double>(lr_positions_) / hr_positions_;
    cost += lr_evals_ * (model == CostModel::Linear ? frac : frac * frac);
  }
  return cost;
}

PreviewEvalCount preview_eval_count(int n, int d, int m, int s, int k, bool guidance) {
  // Steps 0..D-1 at full resolution, one more full-resolution evaluation at
  // t_D whose velocity is stored, s^2 candidate evaluations for selection,
  // then every remaining step at low resolution; guided steps add k.
  const int lr_steps = n - d;
  const int guided = guidance ? m + 1 : 0;
  return {d + 1, s * s + lr_steps + guided * k};
}

double preview_cost(int n, int d, int m, int s, int k, CostModel model, bool guidance) {
  const auto c = preview_eval_count(n, d, m, s, k, guidance);
  return c.hr_evals + c.lr_evals * lr_eval_cost(s, model);
}

double preview_speedup(int n, int d, int m, int s, int k, CostModel model) {
  return static_cast<double>(n) / preview_cost(n, d, m, s, k, model);
}

}  // namespace pflow
