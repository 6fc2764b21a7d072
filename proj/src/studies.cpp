#include "previewflow/studies.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "previewflow/error.hpp"

namespace pflow {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

SeedInputs make_seed_inputs(const GridShape& shape, std::uint64_t seed, const BlobDataset* dataset) {
  SeededRng noise(seed, streams::kNoise);
  SeedInputs in{gaussian_noise(shape.h, shape.w, shape.d, noise), {}};
  if (dataset != nullptr) {
    SeededRng cond(seed, streams::kCondition);
    in.condition = dataset->sample_condition(cond);
  }
  return in;
}

double preview_psnr(const LatentGrid& output, const LatentGrid& hr_final, int s) {
  const LatentGrid reference = area_downsample(to_image(hr_final), s);
  LatentGrid image = to_image(output);
  if (image.h() == hr_final.h() && image.w() == hr_final.w()) image = area_downsample(image, s);
  return psnr(image, reference, 1.0);
}

SeedRun run_seed(const VelocityField& field, const GridShape& shape, std::uint64_t seed,
                 const BlobDataset* dataset, const std::vector<MethodSpec>& methods) {
  const SeedInputs in = make_seed_inputs(shape, seed, dataset);
  SeedRun run;
  run.seed = seed;
  if (methods.empty()) return run;
  const PreviewConfig& first = methods.front().config;
  run.hr = sample_hr(field, first.timesteps(), in.x0, in.condition, true);
  for (const auto& spec : methods) {
    PreviewConfig cfg = spec.config;
    cfg.seed = seed;
    cfg.condition = in.condition;
    MethodResult r;
    r.method = spec.name;
    r.seed = seed;
    if (spec.kind == MethodSpec::Kind::Preview) {
      r.report = sample_preview(field, cfg, in.x0, &run.hr);
    } else {
      r.report = sample_baseline(spec.baseline, field, cfg, in.x0, spec.baseline_params, &run.hr);
    }
    r.report.method = spec.name;
    r.psnr = preview_psnr(r.report.final, run.hr.final, cfg.s);
    const LatentGrid image = to_image(r.report.final);
    r.piqe = image.h() >= 8 && image.w() >= 8 ? piqe(image, 8) : std::nan("");
    run.methods.push_back(std::move(r));
  }
  return run;
}

std::vector<SeedRun> run_seeds(const VelocityField& field, const GridShape& shape,
                               const std::vector<std::uint64_t>& seeds, const BlobDataset* dataset,
                               const std::vector<MethodSpec>& methods) {
  std::vector<SeedRun> runs(seeds.size());
  std::vector<std::string> errors(seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(seeds.size()); ++i) {
    try {
      runs[i] = run_seed(field, shape, seeds[i], dataset, methods);
      // Trajectories are only needed while the methods run.
      runs[i].hr.trajectory = {};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw IntegrationError("seed " + std::to_string(seeds[i]) + ": " + errors[i], 0);
    }
  }
  return runs;
}

std::vector<double> method_values(const std::vector<SeedRun>& runs, const std::string& method,
                                  double MethodResult::*field) {
  std::vector<double> out;
  for (const auto& run : runs) {
    for (const auto& m : run.methods) {
      if (m.method == method) out.push_back(m.*field);
    }
  }
  return out;
}

std::vector<MethodSummary> summarize(const std::vector<SeedRun>& runs, int full_nfe) {
  std::vector<MethodSummary> out;
  if (runs.empty()) return out;
  for (const auto& m : runs.front().methods) {
    MethodSummary s;
    s.method = m.method;
    const auto ps = method_values(runs, m.method, &MethodResult::psnr);
    std::vector<double> pq;
    for (double v : method_values(runs, m.method, &MethodResult::piqe)) {
      if (!std::isnan(v)) pq.push_back(v);
    }
    s.n = static_cast<int>(ps.size());
    s.psnr = mean_std(ps);
    s.piqe = mean_std(pq);
    s.cost_units = m.report.cost_units();
    s.speedup = s.cost_units > 0.0 ? full_nfe / s.cost_units : 0.0;
    out.push_back(s);
  }
  return out;
}

WilcoxonResult compare_psnr(const std::vector<SeedRun>& runs, const std::string& a,
                            const std::string& b) {
  const auto va = method_values(runs, a, &MethodResult::psnr);
  const auto vb = method_values(runs, b, &MethodResult::psnr);
  if (va.size() != vb.size() || va.empty()) {
    throw ContractError("compare_psnr: methods '" + a + "' and '" + b + "' are not paired");
  }
  std::vector<PairedSample> pairs;
  for (std::size_t i = 0; i < va.size(); ++i) pairs.push_back({vb[i], va[i]});
  return wilcoxon_signed_rank(pairs, Alternative::Greater);
}

ConditionTest test_pairs(std::string name, std::vector<PairedSample> pairs) {
  ConditionTest t;
  t.name = std::move(name);
  t.pairs = std::move(pairs);
  try {
    t.p_decrease = wilcoxon_signed_rank(t.pairs, Alternative::Less).p;
    t.p_increase = wilcoxon_signed_rank(t.pairs, Alternative::Greater).p;
    t.p_two_sided = wilcoxon_signed_rank(t.pairs, Alternative::TwoSided).p;
  } catch (const DegenerateInputError&) {
    t.degenerate = true;
    t.p_decrease = t.p_increase = t.p_two_sided = 1.0;
  }
  return t;
}

CgStudyReport cg_effect_study(const VelocityField& field, const GridShape& shape,
                              const PreviewConfig& base, const std::vector<std::uint64_t>& seeds,
                              const BlobDataset* dataset) {
  if (seeds.size() < 30) throw ContractError("cg_effect_study needs at least 30 seeds");
  MethodSpec with;
  with.name = "cg";
  with.config = base;
  with.config.guidance = true;
  MethodSpec without = with;
  without.name = "no-cg";
  without.config.guidance = false;
  const auto runs = run_seeds(field, shape, seeds, dataset, {with, without});

  std::vector<PairedSample> cg_pairs;
  std::vector<PairedSample> nocg_pairs;
  std::vector<PairedSample> cross;
  for (const auto& run : runs) {
    const RunReport& a = run.methods[0].report;
    const RunReport& b = run.methods[1].report;
    cg_pairs.push_back({*a.norm_at_td, *a.norm_at_tdm});
    nocg_pairs.push_back({*b.norm_at_td, *b.norm_at_tdm});
    cross.push_back({*b.norm_at_tdm, *a.norm_at_tdm});
  }
  CgStudyReport report;
  report.seeds = seeds;
  report.with_cg = test_pairs("cg", std::move(cg_pairs));
  report.without_cg = test_pairs("no-cg", std::move(nocg_pairs));
  report.cross = test_pairs("cg-vs-no-cg", std::move(cross));
  return report;
}

std::string CgStudyReport::csv() const {
  std::ostringstream os;
  os << "seed,cg_norm_td,cg_norm_tdm,nocg_norm_td,nocg_norm_tdm\n";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    os << seeds[i] << "," << format_double(with_cg.pairs[i].before) << ","
       << format_double(with_cg.pairs[i].after) << "," << format_double(without_cg.pairs[i].before)
       << "," << format_double(without_cg.pairs[i].after) << "\n";
  }
  return os.str();
}

nlohmann::ordered_json CgStudyReport::summary() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const ConditionTest* t : {&with_cg, &without_cg, &cross}) {
    std::vector<double> before;
    std::vector<double> after;
    for (const auto& p : t->pairs) {
      before.push_back(p.before);
      after.push_back(p.after);
    }
    const auto mb = mean_std(before);
    const auto ma = mean_std(after);
    double w_plus = 0.0;
    if (!t->degenerate) w_plus = wilcoxon_signed_rank(t->pairs, Alternative::Less).w_plus;
    nlohmann::ordered_json j;
    j["metric"] = "commutator_norm";
    j["condition"] = t->name;
    j["n"] = t->pairs.size();
    j["mean_before"] = mb.mean;
    j["std_before"] = mb.stddev;
    j["mean"] = ma.mean;
    j["std"] = ma.stddev;
    j["W"] = w_plus;
    j["p_decrease"] = t->p_decrease;
    j["p_increase"] = t->p_increase;
    j["p"] = t->p_two_sided;
    j["degenerate"] = t->degenerate;
    out.push_back(j);
  }
  return out;
}

std::vector<CosinePoint> cosine_study(const VelocityField& field, const GridShape& shape,
                                      const PreviewConfig& base,
                                      const std::vector<std::uint64_t>& seeds,
                                      const BlobDataset* dataset, int span) {
  std::vector<Trajectory> trajectories(seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(seeds.size()); ++i) {
    const SeedInputs in = make_seed_inputs(shape, seeds[i], dataset);
    trajectories[i] = sample_hr(field, base.timesteps(), in.x0, in.condition, true).trajectory;
  }
  return cosine_trace(trajectories, base.d, span);
}

}  // namespace pflow
