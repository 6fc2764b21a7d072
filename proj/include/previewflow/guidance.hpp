#pragma once

#include <span>

#include "previewflow/grid.hpp"
#include "previewflow/operators.hpp"
#include "previewflow/velocity.hpp"

namespace pflow {

/// Commutator-zero guidance parameters. `target` is D* v(x_{t_D}, t_D), the
/// stored full-resolution velocity pushed through the selected operator.
struct GuidanceState {
  LatentGrid target;
  double t_d = 0.0;
  int step_d = 0;
  int m = 5;
  double alpha = 0.04;
  int k = 1;

  void validate() const;
};

/// apply(op, v_stored).
LatentGrid guidance_target(const SelectionOperator& op, const LatentGrid& v_stored);

struct GuidanceResult {
  LatentGrid x;
  int evals = 0;
};

/// k iterations of x <- x + alpha * (target - v(x, t)).
GuidanceResult guidance_step(const LatentGrid& x, const GuidanceState& state,
                             const VelocityField& field, double t, std::span<const float> cond);

}  // namespace pflow
