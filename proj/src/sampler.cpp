#include "previewflow/sampler.hpp"

#include <chrono>
#include <cmath>

#include "previewflow/commutator.hpp"
#include "previewflow/error.hpp"
#include "previewflow/guidance.hpp"

namespace pflow {

std::string to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::Argmin: return "argmin";
    case SelectionStrategy::Argmax: return "argmax";
    case SelectionStrategy::Random: return "random";
    case SelectionStrategy::Nearest: return "nearest";
  }
  return "unknown";
}

SelectionStrategy selection_strategy_from_string(const std::string& s) {
  if (s == "argmin") return SelectionStrategy::Argmin;
  if (s == "argmax") return SelectionStrategy::Argmax;
  if (s == "random") return SelectionStrategy::Random;
  if (s == "nearest") return SelectionStrategy::Nearest;
  throw ConfigError("unknown selection strategy '" + s + "'");
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::ReducedNfe: return "reduced-nfe";
    case BaselineKind::DirectLr: return "direct-lr";
    case BaselineKind::NaiveDown: return "naive-down";
  }
  return "unknown";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "reduced-nfe") return BaselineKind::ReducedNfe;
  if (s == "direct-lr") return BaselineKind::DirectLr;
  if (s == "naive-down") return BaselineKind::NaiveDown;
  throw ConfigError("unknown baseline kind '" + s + "'");
}

TimestepSchedule PreviewConfig::timesteps() const {
  return schedule ? *schedule : linear_schedule(n);
}

void PreviewConfig::validate(int h, int w) const {
  if (n < 1) throw ContractError("preview: N must be >= 1");
  if (schedule && schedule->steps() != n) throw ContractError("preview: schedule length != N");
  if (!(d > 0 && d < n)) throw ContractError("preview: need 0 < D < N");
  if (m < 0) throw ContractError("preview: m must be >= 0");
  if (d + m + 1 > n) throw ContractError("preview: need D + m + 1 <= N");
  if (s < 2) throw ContractError("preview: s must be >= 2");
  if (h % s != 0 || w % s != 0) throw DivisibilityError("preview: s must divide the grid dims");
  if (!(alpha >= 0.0)) throw ContractError("preview: alpha must be >= 0");
  if (k < 1) throw ContractError("preview: k must be >= 1");
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void euler_step(LatentGrid& x, const LatentGrid& v, double dt, double t_next, std::size_t step) {
  axpy(dt, v, x);
  x.set_t(t_next);
  if (!x.all_finite()) throw IntegrationError("non-finite state during integration", step);
}

void record_compliance(RunReport& report, const SelectionOperator& op, const HrRun* paired) {
  if (paired == nullptr) return;
  const LatentGrid reference = op.apply(paired->final);
  if (!reference.same_shape(report.final)) return;
  report.compliance_deviation = l2_norm(report.final - reference);
  const double ref_norm = l2_norm(reference);
  report.compliance_relative =
      ref_norm > 0.0 ? *report.compliance_deviation / ref_norm : *report.compliance_deviation;
}

// How the operator at the switch step is obtained.
struct SwitchPlan {
  std::string method;
  bool select_from_family = true;
  const SelectionOperator* fixed = nullptr;
  bool store_velocity = true;
  bool guidance = true;
};

RunReport run_switched(const VelocityField& field, const PreviewConfig& cfg, const LatentGrid& x0,
                       int switch_step, const SwitchPlan& plan, const HrRun* paired) {
  const auto start = Clock::now();
  const TimestepSchedule ts = cfg.timesteps();
  const std::span<const float> cond = cfg.condition;

  RunReport report;
  report.method = plan.method;
  report.seed = cfg.seed;
  report.cost_model = cfg.cost_model;
  report.streams["noise"] = streams::kNoise;
  report.streams["condition"] = streams::kCondition;
  report.ledger = EvalLedger(x0.positions());

  if (paired != nullptr && paired->trajectory.states.size() != static_cast<std::size_t>(cfg.n) + 1) {
    throw ContractError("paired full-resolution run must keep its trajectory");
  }

  LatentGrid x = x0;
  x.set_t(ts[0]);
  LatentGrid v_stored;
  LatentGrid target;
  std::optional<SelectionOperator> chosen;
  const int last_guided = switch_step + cfg.m;
  const bool guide = plan.guidance && cfg.guidance;
  GuidanceState gstate;

  for (int i = 0; i < cfg.n; ++i) {
    const double t = ts[i];
    if (i == switch_step) {
      if (plan.store_velocity) {
        v_stored = field.eval(x, t, cond);
        report.ledger.charge(x.positions());
      } else if (paired != nullptr) {
        v_stored = paired->trajectory.velocities[i];
      } else {
        v_stored = field.eval(x, t, cond);  // diagnostic only, not charged
      }
      if (plan.select_from_family) {
        SeededRng family_rng(cfg.seed, streams::kFamily);
        report.streams["family"] = streams::kFamily;
        const OperatorFamily family = build_family(x.h(), x.w(), cfg.s, family_rng, cfg.family_mode);
        const Selection sel = select_operator(field, family, x, t, cond, v_stored, &report.ledger);
        int index = sel.index;
        switch (cfg.selection) {
          case SelectionStrategy::Argmin: break;
          case SelectionStrategy::Argmax: index = argmax_index(sel.norms); break;
          case SelectionStrategy::Random: {
            SeededRng pick(cfg.seed, streams::kRandomSelect);
            report.streams["random_select"] = streams::kRandomSelect;
            index = static_cast<int>(pick.below(sel.norms.size()));
            break;
          }
          case SelectionStrategy::Nearest:
            throw ContractError("nearest selection uses a fixed operator");
        }
        report.selected = index;
        report.candidate_norms = sel.norms;
        report.norm_at_td = sel.norms[index];
        chosen = family.candidates[index];
      } else {
        chosen = *plan.fixed;
        report.norm_at_td = commutator(field, *chosen, x, t, cond, &v_stored).norm;
      }
      target = guidance_target(*chosen, v_stored);
      x = chosen->apply(x);
      if (chosen->needs_decorrelation() && cfg.decorrelate) {
        SeededRng warp_rng(cfg.seed, streams::kWarpNoise);
        report.streams["warp_noise"] = streams::kWarpNoise;
        decorrelate_duplicates(*chosen, x, target, t, warp_rng);
      }
      gstate.target = target;
      gstate.t_d = t;
      gstate.step_d = switch_step;
      gstate.m = cfg.m;
      gstate.alpha = cfg.alpha;
      gstate.k = cfg.k;
    }

    if (i == switch_step) {
      report.residual_at_td = commutator_norm(target - field.eval(x, t, cond));
    }
    if (i == last_guided) {
      const LatentGrid v_lr = field.eval(x, t, cond);
      report.residual_at_tdm = commutator_norm(target - v_lr);
      if (paired != nullptr) {
        report.norm_at_tdm =
            commutator_norm(chosen->apply(paired->trajectory.velocities[i]) - v_lr);
      }
    }

    if (guide && i >= switch_step && i <= last_guided) {
      GuidanceResult g = guidance_step(x, gstate, field, t, cond);
      for (int e = 0; e < g.evals; ++e) report.ledger.charge(x.positions());
      x = std::move(g.x);
      x.set_t(t);
      ++report.guided_steps;
    }

    const LatentGrid v = field.eval(x, t, cond);
    report.ledger.charge(x.positions());
    euler_step(x, v, ts.delta(i), ts[i + 1], static_cast<std::size_t>(i));
  }
  report.guided_steps_after_td = guide ? cfg.m : 0;
  report.final = std::move(x);
  if (chosen) record_compliance(report, *chosen, paired);
  report.wall_ms = elapsed_ms(start);
  return report;
}

}  // namespace

HrRun sample_hr(const VelocityField& field, const TimestepSchedule& schedule, const LatentGrid& x0,
                std::span<const float> cond, bool keep_trajectory, int hr_positions) {
  HrRun run;
  run.ledger = EvalLedger(hr_positions > 0 ? hr_positions : x0.positions());
  LatentGrid x = x0;
  x.set_t(schedule[0]);
  for (int i = 0; i < schedule.steps(); ++i) {
    const LatentGrid v = field.eval(x, schedule[i], cond);
    run.ledger.charge(x.positions());
    if (keep_trajectory) {
      run.trajectory.states.push_back(x);
      run.trajectory.velocities.push_back(v);
    }
    euler_step(x, v, schedule.delta(i), schedule[i + 1], static_cast<std::size_t>(i));
  }
  if (keep_trajectory) run.trajectory.states.push_back(x);
  run.final = std::move(x);
  return run;
}

RunReport sample_preview(const VelocityField& field, const PreviewConfig& config,
                         const LatentGrid& x0, const HrRun* paired) {
  config.validate(x0.h(), x0.w());
  if (config.selection == SelectionStrategy::Nearest) {
    const SelectionOperator op = nearest_operator(x0.h(), x0.w(), config.s);
    SwitchPlan plan{"nearest", false, &op, true, true};
    return run_switched(field, config, x0, config.d, plan, paired);
  }
  SwitchPlan plan{"ours", true, nullptr, true, true};
  if (config.selection != SelectionStrategy::Argmin) plan.method = to_string(config.selection);
  return run_switched(field, config, x0, config.d, plan, paired);
}

RunReport sample_baseline(BaselineKind kind, const VelocityField& field,
                          const PreviewConfig& config, const LatentGrid& x0,
                          const BaselineParams& params, const HrRun* paired) {
  config.validate(x0.h(), x0.w());
  switch (kind) {
    case BaselineKind::ReducedNfe: {
      if (params.reduced_n < 1 || params.reduced_n >= config.n) {
        throw ContractError("reduced-nfe baseline needs 1 <= N' < N");
      }
      const auto start = Clock::now();
      HrRun run = sample_hr(field, linear_schedule(params.reduced_n), x0, config.condition);
      RunReport report;
      report.method = to_string(kind);
      report.final = std::move(run.final);
      report.ledger = run.ledger;
      report.cost_model = config.cost_model;
      report.seed = config.seed;
      report.streams["noise"] = streams::kNoise;
      report.streams["condition"] = streams::kCondition;
      if (paired != nullptr) {
        report.compliance_deviation = l2_norm(report.final - paired->final);
        const double ref = l2_norm(paired->final);
        report.compliance_relative = ref > 0.0 ? *report.compliance_deviation / ref : 0.0;
      }
      report.wall_ms = elapsed_ms(start);
      return report;
    }
    case BaselineKind::DirectLr: {
      const auto start = Clock::now();
      const SelectionOperator strided = nearest_operator(x0.h(), x0.w(), config.s);
      const LatentGrid lr_noise = strided.apply(x0);
      HrRun run = sample_hr(field, config.timesteps(), lr_noise, config.condition, false,
                            x0.positions());
      RunReport report;
      report.method = to_string(kind);
      report.final = std::move(run.final);
      report.ledger = run.ledger;
      report.cost_model = config.cost_model;
      report.seed = config.seed;
      report.streams["noise"] = streams::kNoise;
      report.streams["condition"] = streams::kCondition;
      record_compliance(report, strided, paired);
      report.wall_ms = elapsed_ms(start);
      return report;
    }
    case BaselineKind::NaiveDown: {
      const SelectionOperator op = nearest_operator(x0.h(), x0.w(), config.s);
      SwitchPlan plan{to_string(kind), false, &op, false, false};
      return run_switched(field, config, x0, config.d, plan, paired);
    }
  }
  throw ContractError("unknown baseline kind");
}

RunReport sample_manipulated(const VelocityField& field, const PreviewConfig& config,
                             const SelectionOperator& op, int t_m, const LatentGrid& x0,
                             const HrRun* paired) {
  if (op.in_h() != op.out_h() || op.in_w() != op.out_w()) {
    throw ContractError("manipulation operator must preserve the grid size");
  }
  if (op.in_h() != x0.h() || op.in_w() != x0.w()) {
    throw DimensionError("manipulation operator does not match the grid");
  }
  if (!(t_m > 0 && t_m < config.n) || t_m + config.m + 1 > config.n) {
    throw ContractError("manipulation step must satisfy 0 < t_M and t_M + m + 1 <= N");
  }
  if (config.k < 1 || !(config.alpha >= 0.0)) throw ContractError("invalid guidance settings");
  SwitchPlan plan{to_string(op.kind()), false, &op, true, true};
  return run_switched(field, config, x0, t_m, plan, paired);
}

void decorrelate_duplicates(const SelectionOperator& op, LatentGrid& x, const LatentGrid& v,
                            double t, SeededRng& rng) {
  require_same_shape(x, v, "decorrelate_duplicates");
  const int d = x.d();
  auto xv = x.data();
  auto vv = v.data();
  for (const auto& group : op.duplication_map()) {
    // group[0] keeps the original sample.
    for (std::size_t g = 1; g < group.size(); ++g) {
      const std::size_t base = static_cast<std::size_t>(group[g]) * d;
      for (int c = 0; c < d; ++c) {
        const double xi = xv[base + c];
        const double noise_hat = xi - t * vv[base + c];
        xv[base + c] = static_cast<float>(xi + (1.0 - t) * (rng.normal() - noise_hat));
      }
    }
  }
}

nlohmann::ordered_json RunReport::to_json(bool include_timing) const {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["method"] = method;
  j["seed"] = seed;
  j["streams"] = streams;
  j["final_dims"] = {final.h(), final.w(), final.d()};
  j["selected_candidate"] = selected ? nlohmann::ordered_json(*selected) : nlohmann::ordered_json(nullptr);
  j["candidate_norms"] = candidate_norms;
  j["norm_at_td"] = opt(norm_at_td);
  j["norm_at_tdm"] = opt(norm_at_tdm);
  j["residual_at_td"] = opt(residual_at_td);
  j["residual_at_tdm"] = opt(residual_at_tdm);
  j["guided_steps"] = guided_steps;
  j["guided_steps_after_td"] = guided_steps_after_td;
  j["hr_evals"] = ledger.hr_evals();
  j["lr_evals"] = ledger.lr_evals();
  j["cost_model"] = to_string(cost_model);
  j["cost_units"] = cost_units();
  j["compliance_deviation"] = opt(compliance_deviation);
  j["compliance_relative"] = opt(compliance_relative);
  j["wall_ms"] = include_timing ? nlohmann::ordered_json(wall_ms) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace pflow
