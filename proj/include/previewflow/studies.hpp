#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "previewflow/dataset.hpp"
#include "previewflow/metrics.hpp"
#include "previewflow/sampler.hpp"
#include "previewflow/wilcoxon.hpp"

namespace pflow {

struct GridShape {
  int h = 16;
  int w = 16;
  int d = 3;
};

/// Per-seed inputs: x0 from the noise stream and, when a dataset is given,
/// a condition drawn from its condition stream.
struct SeedInputs {
  LatentGrid x0;
  Condition condition;
};
SeedInputs make_seed_inputs(const GridShape& shape, std::uint64_t seed, const BlobDataset* dataset);

/// One method to run per seed, compared against the seed's full-resolution
/// sample.
struct MethodSpec {
  std::string name;
  enum class Kind { Preview, Baseline } kind = Kind::Preview;
  PreviewConfig config;
  BaselineKind baseline = BaselineKind::NaiveDown;
  BaselineParams baseline_params;
};

struct MethodResult {
  std::string method;
  std::uint64_t seed = 0;
  RunReport report;
  /// Against the s x s block average of the full-resolution image.
  double psnr = 0.0;
  double piqe = 0.0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  HrRun hr;
  std::vector<MethodResult> methods;
};

/// Runs the full-resolution reference (trajectory kept) and every method for
/// one seed. `base.seed` and `base.condition` are overwritten per seed.
SeedRun run_seed(const VelocityField& field, const GridShape& shape, std::uint64_t seed,
                 const BlobDataset* dataset, const std::vector<MethodSpec>& methods);

/// Seeds fan out over OpenMP threads; results come back in seed order.
std::vector<SeedRun> run_seeds(const VelocityField& field, const GridShape& shape,
                               const std::vector<std::uint64_t>& seeds, const BlobDataset* dataset,
                               const std::vector<MethodSpec>& methods);

/// PSNR of an output (low or full resolution) against the area-downsampled
/// full-resolution image; both mapped to [0, 1] image space.
double preview_psnr(const LatentGrid& output, const LatentGrid& hr_final, int s);

struct MethodSummary {
  std::string method;
  int n = 0;
  MeanStd psnr;
  MeanStd piqe;
  double cost_units = 0.0;
  double speedup = 0.0;
};
std::vector<MethodSummary> summarize(const std::vector<SeedRun>& runs, int full_nfe);

/// Paired Wilcoxon test that method `a` has higher PSNR than method `b`.
WilcoxonResult compare_psnr(const std::vector<SeedRun>& runs, const std::string& a,
                            const std::string& b);

std::vector<double> method_values(const std::vector<SeedRun>& runs, const std::string& method,
                                  double MethodResult::*field);

struct ConditionTest {
  std::string name;
  std::vector<PairedSample> pairs;
  /// p-values for after < before, after > before and two-sided; a
  /// degenerate input (all differences zero) reports p = 1 and sets the flag.
  double p_decrease = 1.0;
  double p_increase = 1.0;
  double p_two_sided = 1.0;
  bool degenerate = false;
};

ConditionTest test_pairs(std::string name, std::vector<PairedSample> pairs);

/// Commutator norms at t_D and t_{D+m} with and without guidance, over seeds.
struct CgStudyReport {
  std::vector<std::uint64_t> seeds;
  ConditionTest with_cg;
  ConditionTest without_cg;
  /// t_{D+m} norms: without CG (before) vs with CG (after).
  ConditionTest cross;

  std::string csv() const;
  nlohmann::ordered_json summary() const;
};

CgStudyReport cg_effect_study(const VelocityField& field, const GridShape& shape,
                              const PreviewConfig& base, const std::vector<std::uint64_t>& seeds,
                              const BlobDataset* dataset);

/// Mean cosine trace over the seeds' full-resolution trajectories.
std::vector<CosinePoint> cosine_study(const VelocityField& field, const GridShape& shape,
                                      const PreviewConfig& base,
                                      const std::vector<std::uint64_t>& seeds,
                                      const BlobDataset* dataset, int span);

std::string format_double(double v);

}  // namespace pflow
