#include "previewflow/commutator.hpp"

#include <cmath>

#include "previewflow/error.hpp"
#include "previewflow/kernels.hpp"

namespace pflow {

double commutator_norm(const LatentGrid& grid) {
  if (grid.empty()) return 0.0;
  return kernels::mean_row_norm(grid.data(), grid.d());
}

double commutator_rms(const LatentGrid& grid) {
  if (grid.empty()) return 0.0;
  return l2_norm(grid) / std::sqrt(static_cast<double>(grid.size()));
}

CommutatorReport commutator(const VelocityField& field, const SelectionOperator& op,
                            const LatentGrid& x, double t, std::span<const float> cond,
                            const LatentGrid* v_hr, EvalLedger* ledger) {
  CommutatorReport report;
  LatentGrid v_full;
  if (v_hr != nullptr) {
    require_same_shape(*v_hr, x, "commutator stored velocity");
    report.hr_eval_reused = true;
  } else {
    v_full = field.eval(x, t, cond);
    if (ledger) ledger->charge(x.positions());
  }
  const LatentGrid& v = v_hr != nullptr ? *v_hr : v_full;
  const LatentGrid down_x = op.apply(x);
  const LatentGrid v_down = field.eval(down_x, t, cond);
  if (ledger) ledger->charge(down_x.positions());
  report.grid = op.apply(v) - v_down;
  report.norm = commutator_norm(report.grid);
  return report;
}

int argmin_index(std::span<const double> norms) {
  if (norms.empty()) throw ContractError("argmin of empty list");
  int best = 0;
  for (std::size_t i = 1; i < norms.size(); ++i) {
    if (norms[i] < norms[best]) best = static_cast<int>(i);
  }
  return best;
}

int argmax_index(std::span<const double> norms) {
  if (norms.empty()) throw ContractError("argmax of empty list");
  int best = 0;
  for (std::size_t i = 1; i < norms.size(); ++i) {
    if (norms[i] > norms[best]) best = static_cast<int>(i);
  }
  return best;
}

Selection select_operator(const VelocityField& field, const OperatorFamily& family,
                          const LatentGrid& x, double t, std::span<const float> cond,
                          const LatentGrid& v_hr, EvalLedger* ledger) {
  if (family.candidates.empty()) throw ContractError("select_operator: empty family");
  Selection sel;
  sel.norms.reserve(family.candidates.size());
  for (std::size_t k = 0; k < family.candidates.size(); ++k) {
    const auto report = commutator(field, family.candidates[k], x, t, cond, &v_hr, ledger);
    sel.norms.push_back(report.norm);
  }
  sel.index = argmin_index(sel.norms);
  return sel;
}

}  // namespace pflow
