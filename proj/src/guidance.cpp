#include "previewflow/guidance.hpp"

#include "previewflow/error.hpp"

namespace pflow {

void GuidanceState::validate() const {
  if (!(alpha >= 0.0)) throw ContractError("guidance: alpha must be >= 0");
  if (m < 0) throw ContractError("guidance: m must be >= 0");
  if (k < 1) throw ContractError("guidance: k must be >= 1");
  if (target.empty()) throw ContractError("guidance: missing target");
}

LatentGrid guidance_target(const SelectionOperator& op, const LatentGrid& v_stored) {
  return op.apply(v_stored);
}

GuidanceResult guidance_step(const LatentGrid& x, const GuidanceState& state,
                             const VelocityField& field, double t, std::span<const float> cond) {
  state.validate();
  require_same_shape(x, state.target, "guidance step");
  GuidanceResult result{x, 0};
  for (int iter = 0; iter < state.k; ++iter) {
    const LatentGrid v = field.eval(result.x, t, cond);
    ++result.evals;
    auto xv = result.x.data();
    auto gv = state.target.data();
    auto vv = v.data();
    const float a = static_cast<float>(state.alpha);
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] += a * (gv[i] - vv[i]);
  }
  return result;
}

}  // namespace pflow
