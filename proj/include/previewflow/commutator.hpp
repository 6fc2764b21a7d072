#pragma once

#include <optional>
#include <span>
#include <vector>

#include "previewflow/cost.hpp"
#include "previewflow/grid.hpp"
#include "previewflow/operators.hpp"
#include "previewflow/rng.hpp"
#include "previewflow/velocity.hpp"

namespace pflow {

/// [D, v](x, t) = D v(x, t) - v(D x, t) at the operator's output resolution.
struct CommutatorReport {
  LatentGrid grid;
  double norm = 0.0;
  std::optional<int> candidate;
  bool hr_eval_reused = false;
};

/// Spatial mean of the per-position Euclidean norm over channels.
double commutator_norm(const LatentGrid& grid);
/// Root mean square over all entries; a sensitivity alternative, never used
/// for selection.
double commutator_rms(const LatentGrid& grid);

/// When `v_hr` is given it must equal v(x, t) and is reused instead of a new
/// full-resolution evaluation. Evaluations performed are charged to `ledger`.
CommutatorReport commutator(const VelocityField& field, const SelectionOperator& op,
                            const LatentGrid& x, double t, std::span<const float> cond,
                            const LatentGrid* v_hr = nullptr, EvalLedger* ledger = nullptr);

struct Selection {
  int index = 0;
  std::vector<double> norms;
};

/// Commutator norm of every candidate, reusing `v_hr` for all of them, and
/// the argmin (lowest index on ties). Charges s^2 low-resolution evaluations.
Selection select_operator(const VelocityField& field, const OperatorFamily& family,
                          const LatentGrid& x, double t, std::span<const float> cond,
                          const LatentGrid& v_hr, EvalLedger* ledger = nullptr);

/// Lowest index achieving the minimum (or maximum) norm.
int argmin_index(std::span<const double> norms);
int argmax_index(std::span<const double> norms);

}  // namespace pflow
