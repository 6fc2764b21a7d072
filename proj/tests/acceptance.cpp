// One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.
// Runs from the build directory; the trained toy model is cached under
// acceptance_work/model and reused when present.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "previewflow/cost.hpp"
#include "previewflow/error.hpp"
#include "previewflow/guidance.hpp"
#include "previewflow/harness.hpp"
#include "previewflow/metrics.hpp"
#include "previewflow/studies.hpp"
#include "previewflow/tensor_io.hpp"
#include "previewflow/wilcoxon.hpp"

using namespace pflow;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kAlphaSig = 0.05;
constexpr int kCgSeeds = 100;
constexpr int kOrderingSeeds = 200;
constexpr double kTrainBudgetS = 600.0;

int failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s criterion %d: %s | %s\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
}

void info(const std::string& text) {
  std::printf("  info: %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::vector<std::uint64_t> seed_block(std::uint64_t first, int n) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(first + i);
  return s;
}

// --- 1: operator algebra ----------------------------------------------------

void criterion_operators() {
  const auto t0 = Clock::now();
  bool partition_ok = true;
  bool disjoint_ok = true;
  double worst_dense = 0.0;
  int families = 0;
  SeededRng data(1, streams::kTest);
  for (int s : {2, 3, 4}) {
    for (int h = s; h <= 16; h += s) {
      for (int w = s; w <= 16; w += s) {
        for (auto mode : {FamilyMode::PerBlock, FamilyMode::Shared}) {
          SeededRng rng(static_cast<std::uint64_t>(h * 100 + w), streams::kFamily);
          const OperatorFamily fam = build_family(h, w, s, rng, mode);
          ++families;
          const int oh = h / s;
          const int ow = w / s;
          if (static_cast<int>(fam.candidates.size()) != s * s) partition_ok = false;
          // Every block: the s^2 candidates pick s^2 distinct cells of that block.
          for (int by = 0; by < oh; ++by) {
            for (int bx = 0; bx < ow; ++bx) {
              std::set<int> seen;
              for (const auto& op : fam.candidates) {
                const GridIndex g = op.source(by, bx);
                if (g.y / s != by || g.x / s != bx) partition_ok = false;
                seen.insert(g.y * w + g.x);
              }
              if (static_cast<int>(seen.size()) != s * s) partition_ok = false;
            }
          }
          // Source sets of distinct candidates never overlap.
          std::vector<std::set<int>> sets;
          for (const auto& op : fam.candidates) {
            sets.emplace_back(op.sources().begin(), op.sources().end());
          }
          for (std::size_t i = 0; i < sets.size(); ++i) {
            for (std::size_t j = i + 1; j < sets.size(); ++j) {
              for (int v : sets[i]) {
                if (sets[j].count(v)) disjoint_ok = false;
              }
            }
          }
          // Dense matrix assembled from the permutation table.
          const int d = 2;
          LatentGrid x(h, w, d);
          for (float& v : x.data()) v = static_cast<float>(data.normal());
          const int cols = h * w;
          for (int k = 0; k < s * s; ++k) {
            std::vector<float> m(static_cast<std::size_t>(oh * ow) * cols, 0.0f);
            for (int by = 0; by < oh; ++by) {
              for (int bx = 0; bx < ow; ++bx) {
                const int b = by * ow + bx;
                const int off = fam.permutations[b][k];
                m[static_cast<std::size_t>(b) * cols + (by * s + off / s) * w + bx * s + off % s] = 1.0f;
              }
            }
            const LatentGrid y = fam.candidates[k].apply(x);
            for (int r = 0; r < oh * ow; ++r) {
              for (int c = 0; c < d; ++c) {
                double acc = 0.0;
                for (int j = 0; j < cols; ++j) {
                  acc += m[static_cast<std::size_t>(r) * cols + j] * x.data()[j * d + c];
                }
                worst_dense = std::max(worst_dense, std::abs(acc - y.data()[r * d + c]));
              }
            }
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, partition_ok && disjoint_ok && worst_dense <= 1e-6 && secs < 5.0,
         "candidate families partition blocks, are disjoint, match dense oracle",
         std::to_string(families) + " families, partition " + (partition_ok ? "ok" : "BROKEN") +
             ", disjoint " + (disjoint_ok ? "ok" : "BROKEN") + ", max dense diff " +
             fmt("%.3g", worst_dense) + " (tol 1e-6), " + fmt("%.2fs", secs) + " (limit 5s)");
}

// --- 2: compliance ----------------------------------------------------------

void criterion_compliance() {
  const auto t0 = Clock::now();
  const ChannelAffineField affine(3, {0.6f, 0.2f, 0.0f, -0.1f, -0.8f, 0.3f, 0.0f, 0.4f, 0.5f},
                                  {0.1f, -0.2f, 0.05f});
  const GaussianOracleField oracle(0.2, 0.6);
  const auto constant = ChannelAffineField::constant({0.3f, -0.7f, 0.2f});
  struct Case {
    const char* name;
    const VelocityField* field;
    bool guidance;
  };
  const Case cases[] = {{"channel-affine", &affine, false},
                        {"gaussian-oracle", &oracle, false},
                        {"constant (guided)", &constant, true}};
  double worst = 0.0;
  int runs = 0;
  for (const auto& c : cases) {
    for (int s : {2, 4}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        PreviewConfig cfg;
        cfg.s = s;
        cfg.seed = seed;
        cfg.guidance = c.guidance;
        SeededRng rng(seed, streams::kNoise);
        const LatentGrid x0 = gaussian_noise(16, 16, 3, rng);
        const HrRun hr = sample_hr(*c.field, cfg.timesteps(), x0, {}, true);
        const RunReport r = sample_preview(*c.field, cfg, x0, &hr);
        worst = std::max(worst, *r.compliance_relative);
        ++runs;
      }
    }
  }
  // Informational: with guidance on, the stale stored velocity moves a
  // state-dependent field off the exact trajectory.
  {
    PreviewConfig cfg;
    SeededRng rng(0, streams::kNoise);
    const LatentGrid x0 = gaussian_noise(16, 16, 3, rng);
    const HrRun hr = sample_hr(affine, cfg.timesteps(), x0, {}, true);
    info("channel-affine with guidance on: relative deviation " +
         fmt("%.3g", *sample_preview(affine, cfg, x0, &hr).compliance_relative));
  }
  const double secs = seconds_since(t0);
  report(2, worst <= 1e-5 && secs < 10.0,
         "preview equals D applied to the full-resolution output for commuting fields",
         std::to_string(runs) + " runs, max relative deviation " + fmt("%.3g", worst) +
             " (tol 1e-5), " + fmt("%.2fs", secs) + " (limit 10s)");
}

// --- 3: guidance ------------------------------------------------------------

void criterion_guidance() {
  SeededRng rng(3, streams::kTest);
  LatentGrid x = gaussian_noise(8, 8, 3, rng);
  x.set_t(0.4);
  const auto identity = ChannelAffineField::scaled_identity(3, 1.0f);

  GuidanceState fixed;
  fixed.target = identity.eval(x, 0.4);
  fixed.alpha = 0.5;
  fixed.k = 3;
  const double fixed_move = max_abs_diff(guidance_step(x, fixed, identity, 0.4, {}).x, x);

  double worst = 0.0;
  std::string factors;
  for (double alpha : {0.04, 0.5, 1.0}) {
    GuidanceState st;
    st.target = gaussian_noise(8, 8, 3, rng);
    st.alpha = alpha;
    st.k = 1;
    const double before = l2_norm(st.target - identity.eval(x, 0.4));
    const LatentGrid next = guidance_step(x, st, identity, 0.4, {}).x;
    const double after = l2_norm(st.target - identity.eval(next, 0.4));
    const double factor = after / before;
    worst = std::max(worst, std::abs(factor - (1.0 - alpha)));
    factors += fmt(" %.7f", factor);
  }
  report(3, fixed_move <= 1e-6 && worst <= 1e-6, "guidance fixed point and (1 - alpha) contraction",
         "fixed-point move " + fmt("%.3g", fixed_move) + ", factors" + factors +
             " for alpha 0.04/0.5/1.0, max error " + fmt("%.3g", worst) + " (tol 1e-6)");
}

// --- 8: cost ----------------------------------------------------------------

void criterion_cost() {
  const double cost = preview_cost(30, 10, 5, 2, 1, CostModel::Linear);
  const double speedup = preview_speedup(30, 10, 5, 2, 1, CostModel::Linear);
  report(8, cost == 18.5 && speedup == 30.0 / 18.5,
         "closed-form speedup for N=30, D=10, m=5, s=2, linear cost",
         "cost " + fmt("%.17g", cost) + " HR units, speedup " + fmt("%.6f", speedup) +
             "x (exact 30/18.5; inside the 1.49-1.75x band reported for real models)");
}

// --- 9: wilcoxon ------------------------------------------------------------

// All 2^n sign patterns over average ranks of |d|.
std::pair<double, double> enumerate_tails(const std::vector<PairedSample>& pairs) {
  std::vector<double> absd;
  std::vector<bool> pos;
  for (const auto& p : pairs) {
    const double d = p.after - p.before;
    if (d == 0.0) continue;
    absd.push_back(std::abs(d));
    pos.push_back(d > 0);
  }
  const std::size_t n = absd.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lower = 0, same = 0;
    for (std::size_t j = 0; j < n; ++j) {
      lower += absd[j] < absd[i];
      same += absd[j] == absd[i];
    }
    rank[i] = lower + (same + 1) / 2;
  }
  double obs = 0;
  for (std::size_t i = 0; i < n; ++i) obs += pos[i] ? rank[i] : 0;
  double le = 0, ge = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) w += (mask >> i & 1u) ? rank[i] : 0;
    le += w <= obs + 1e-9;
    ge += w >= obs - 1e-9;
  }
  const double total = std::ldexp(1.0, static_cast<int>(n));
  return {le / total, ge / total};
}

void criterion_wilcoxon() {
  SeededRng rng(9, streams::kTest);
  double worst = 0.0;
  int instances = 0;
  while (instances < 200) {
    const int n = 1 + static_cast<int>(rng.below(10));
    std::vector<PairedSample> pairs;
    for (int i = 0; i < n; ++i) {
      pairs.push_back({std::round(rng.normal() * 4) / 2, std::round(rng.normal() * 4) / 2});
    }
    bool any = false;
    for (const auto& p : pairs) any = any || p.before != p.after;
    if (!any) continue;
    ++instances;
    const auto [lo, hi] = enumerate_tails(pairs);
    const double two = std::min(1.0, 2 * std::min(lo, hi));
    worst = std::max(worst, std::abs(wilcoxon_signed_rank(pairs, Alternative::Less, WilcoxonMethod::Exact).p - lo));
    worst = std::max(worst, std::abs(wilcoxon_signed_rank(pairs, Alternative::Greater, WilcoxonMethod::Exact).p - hi));
    worst = std::max(worst, std::abs(wilcoxon_signed_rank(pairs, Alternative::TwoSided, WilcoxonMethod::Exact).p - two));
  }
  std::vector<PairedSample> five;
  for (int i = 1; i <= 5; ++i) five.push_back({0.0, static_cast<double>(i)});
  const double p5 = wilcoxon_signed_rank(five, Alternative::Greater).p;
  report(9, worst <= 1e-12 && p5 == 1.0 / 32.0, "exact Wilcoxon p equals sign-pattern enumeration",
         "200 instances n<=10 with ties, max error " + fmt("%.3g", worst) +
             " (tol 1e-12); n=5 example p = " + fmt("%.10g", p5) + " (expect 0.03125)");
}

// --- 10: metric units -------------------------------------------------------

void criterion_metrics() {
  const LatentGrid a = LatentGrid::filled(16, 16, 3, 0.25f);
  const LatentGrid b = LatentGrid::filled(16, 16, 3, 0.25f + 16.0f / 255.0f);
  const double offset = psnr(a, b, 1.0);
  const double zero = psnr(LatentGrid::filled(16, 16, 3, 0.0f), LatentGrid::filled(16, 16, 3, 1.0f), 1.0);
  const double cap = psnr(a, a, 1.0);
  const double p_const = piqe(LatentGrid::filled(32, 32, 3, 0.5f));
  SeededRng rng(10, streams::kTest);
  LatentGrid noise(32, 32, 3);
  for (float& v : noise.data()) v = static_cast<float>(rng.uniform());
  const double p_noise = piqe(noise);
  const bool ok = std::abs(offset - 24.05) <= 1e-2 && std::abs(zero) <= 1e-2 &&
                  std::abs(cap - kPsnrCap) <= 1e-2 && p_const == 1.0 && p_noise > p_const;
  report(10, ok, "PSNR closed forms and PIQE ordering",
         "offset 16/255 -> " + fmt("%.4f", offset) + " dB (24.05), full-range -> " +
             fmt("%.4f", zero) + " dB (0), identical -> " + fmt("%.1f", cap) + " dB (cap 99); PIQE constant " +
             fmt("%.4f", p_const) + ", noise " + fmt("%.4f", p_noise));
}

// --- toy model ----------------------------------------------------------------

struct Model {
  std::shared_ptr<VelocityField> field;
  fs::path checkpoint;
  double train_seconds = 0.0;
  bool cached = false;
};

Model toy_model(const fs::path& work) {
  Model m;
  const fs::path dir = work / "model";
  m.checkpoint = fs::absolute(dir / "checkpoint.ckpt");
  const fs::path seconds_file = dir / "train_seconds.txt";
  if (fs::exists(m.checkpoint) && fs::exists(seconds_file)) {
    m.cached = true;
    m.train_seconds = std::stod(io::read_text(seconds_file));
  } else {
    ExperimentConfig cfg;
    cfg.command = "train";
    cfg.out = dir.string();
    const auto t0 = Clock::now();
    run_command(cfg);
    m.train_seconds = seconds_since(t0);
    io::write_text_atomic(seconds_file, fmt("%.3f", m.train_seconds) + "\n");
  }
  FieldSpec spec;
  spec.checkpoint = m.checkpoint.string();
  m.field = make_field(spec, fs::current_path());
  return m;
}

// --- 4: cg effect -------------------------------------------------------------

void criterion_cg(const Model& model) {
  const auto t0 = Clock::now();
  const BlobDataset data;
  const PreviewConfig base;
  const auto study = cg_effect_study(*model.field, GridShape{}, base, seed_block(1000, kCgSeeds), &data);
  const double secs = seconds_since(t0);
  const auto s = study.summary();
  const bool cg_decreases = study.with_cg.p_decrease < kAlphaSig;
  const bool nocg_ok = study.without_cg.p_decrease >= kAlphaSig || study.without_cg.p_increase < kAlphaSig;
  report(4, cg_decreases && nocg_ok && model.train_seconds <= kTrainBudgetS && secs < 900.0,
         "CG decreases the commutator norm from t_D to t_{D+m}; no-CG does not",
         std::to_string(kCgSeeds) + " seeds; CG mean " + fmt("%.4f", s[0]["mean_before"]) + " -> " +
             fmt("%.4f", s[0]["mean"]) + ", p_decrease " + fmt("%.3g", study.with_cg.p_decrease) +
             " (need < 0.05); no-CG mean " + fmt("%.4f", s[1]["mean_before"]) + " -> " +
             fmt("%.4f", s[1]["mean"]) + ", p_decrease " + fmt("%.3g", study.without_cg.p_decrease) +
             ", p_increase " + fmt("%.3g", study.without_cg.p_increase) + "; " + fmt("%.1fs", secs) +
             " (limit 900s)");
  info("CG vs no-CG at t_{D+m}: p(CG lower) " + fmt("%.3g", study.cross.p_decrease));
}

// --- 5 and 6: orderings -------------------------------------------------------

void criteria_orderings(const Model& model) {
  const auto t0 = Clock::now();
  const BlobDataset data;
  const PreviewConfig base;
  std::vector<MethodSpec> methods;
  auto preview = [&](const char* name, SelectionStrategy sel) {
    MethodSpec m;
    m.name = name;
    m.config = base;
    m.config.selection = sel;
    methods.push_back(m);
  };
  auto baseline = [&](BaselineKind kind) {
    MethodSpec m;
    m.name = to_string(kind);
    m.kind = MethodSpec::Kind::Baseline;
    m.baseline = kind;
    m.config = base;
    methods.push_back(m);
  };
  preview("ours", SelectionStrategy::Argmin);
  preview("nearest", SelectionStrategy::Nearest);
  preview("random", SelectionStrategy::Random);
  preview("argmax", SelectionStrategy::Argmax);
  baseline(BaselineKind::NaiveDown);
  baseline(BaselineKind::DirectLr);
  baseline(BaselineKind::ReducedNfe);
  const auto runs = run_seeds(*model.field, GridShape{}, seed_block(5000, kOrderingSeeds), &data, methods);
  const double secs = seconds_since(t0);
  std::map<std::string, MethodSummary> sum;
  for (const auto& s : summarize(runs, base.n)) sum[s.method] = s;
  auto mean = [&](const char* m) { return sum.at(m).psnr.mean; };

  const double p_sel = compare_psnr(runs, "ours", "nearest").p;
  report(5, mean("ours") > mean("nearest") && p_sel < kAlphaSig && secs < 1800.0,
         "argmin selection beats the nearest operator in PSNR",
         std::to_string(kOrderingSeeds) + " seeds; argmin " + fmt("%.3f", mean("ours")) + " dB, nearest " +
             fmt("%.3f", mean("nearest")) + " dB, p " + fmt("%.3g", p_sel) + " (need < 0.05); " +
             fmt("%.1fs", secs) + " for all 7 methods (limit 1800s)");
  info("random " + fmt("%.3f", mean("random")) + " dB, argmax " + fmt("%.3f", mean("argmax")) +
       " dB (reported, not gated)");

  const double p_ours_naive = compare_psnr(runs, "ours", "naive-down").p;
  const double p_naive_direct = compare_psnr(runs, "naive-down", "direct-lr").p;
  const bool ok = mean("ours") > mean("naive-down") && mean("naive-down") > mean("direct-lr") &&
                  p_ours_naive < kAlphaSig && p_naive_direct < kAlphaSig;
  report(6, ok, "PSNR ordering ours > naive-down > direct-lr",
         "ours " + fmt("%.3f", mean("ours")) + ", naive-down " + fmt("%.3f", mean("naive-down")) +
             ", direct-lr " + fmt("%.3f", mean("direct-lr")) + " dB; p " + fmt("%.3g", p_ours_naive) +
             " and " + fmt("%.3g", p_naive_direct) + " (need < 0.05)");
  info("reduced-nfe " + fmt("%.3f", mean("reduced-nfe")) + " dB at cost " +
       fmt("%.1f", sum.at("reduced-nfe").cost_units) + " (not gated)");
}

// --- 7: cosine ----------------------------------------------------------------

void criterion_cosine(const Model& model) {
  const BlobDataset data;
  const auto trace = cosine_study(*model.field, GridShape{}, PreviewConfig{}, seed_block(1000, 100), &data, 5);
  bool ok = true;
  std::string detail = "100 seeds, mean cosine";
  for (const auto& p : trace) {
    ok = ok && p.mean > 0.9;
    detail += fmt(" %.4f", p.mean);
  }
  report(7, ok, "velocity at t_D stays aligned with t_{D+k} for k <= 5", detail + " for k=1..5 (need > 0.9)");
}

// --- 11: determinism ----------------------------------------------------------

int run_cli(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd \"" + cwd.string() + "\" && PREVIEWFLOW_DETERMINISTIC=1 \"" PREVIEWFLOW_CLI
                          "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> collect_outputs(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".csv" || ext == ".json")) {
      out[fs::relative(e.path(), root).string()] = io::read_text(e.path());
    }
  }
  return out;
}

void criterion_determinism(const Model& model, const fs::path& work) {
  const fs::path root = work / "determinism";
  fs::remove_all(root);
  ExperimentConfig cfg;
  cfg.field.checkpoint = model.checkpoint.string();
  cfg.baselines = {"reduced-nfe", "direct-lr", "naive-down"};
  cfg.train.steps = 20;
  cfg.train.probe_samples = 8;
  cfg.ablate.k_values = {1, 2};
  const std::vector<std::string> commands = {
      "train --out out/train",
      "preview --seeds 0-3 --out out/preview",
      "compare out/preview --out out/compare",
      "ablate --axis k --seeds 0-2 --out out/ablate",
      "stats --study cg --seeds 0-29 --out out/cg",
      "stats --study cosine --seeds 0-3 --out out/cosine"};
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    io::write_text_atomic(dir / "config.json", cfg.to_json().dump(2));
    for (const auto& c : commands) {
      const int code = run_cli(dir, c + " --config config.json");
      if (code != 0) {
        ok = false;
        info(std::string("run ") + run + ": '" + c + "' exited " + std::to_string(code));
      }
    }
  }
  const auto a = collect_outputs(root / "a" / "out");
  const auto b = collect_outputs(root / "b" / "out");
  int differing = 0;
  for (const auto& [name, text] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != text) {
      ++differing;
      info("differs: " + name);
    }
  }
  ok = ok && differing == 0 && a.size() == b.size() && !a.empty();
  const bool ckpt_same = io::read_text(root / "a" / "out" / "train" / "checkpoint.ckpt") ==
                         io::read_text(root / "b" / "out" / "train" / "checkpoint.ckpt");
  report(11, ok && ckpt_same, "reruns with PREVIEWFLOW_DETERMINISTIC=1 give byte-identical outputs",
         std::to_string(commands.size()) + " commands twice, " + std::to_string(a.size()) +
             " CSV/JSON files compared, " + std::to_string(differing) + " differ; checkpoint " +
             (ckpt_same ? "identical" : "DIFFERS"));
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, "threw", e.what());
  }
}

}  // namespace

int main() {
  const fs::path work = fs::absolute("acceptance_work");
  fs::create_directories(work);

  guarded(1, criterion_operators);
  guarded(2, criterion_compliance);
  guarded(3, criterion_guidance);
  guarded(8, criterion_cost);
  guarded(9, criterion_wilcoxon);
  guarded(10, criterion_metrics);

  Model model;
  try {
    model = toy_model(work);
    info(std::string("toy model ") + (model.cached ? "reused" : "trained") + ", training took " +
         fmt("%.1fs", model.train_seconds) + " (budget 600s)");
  } catch (const std::exception& e) {
    for (int id : {4, 5, 6, 7, 11}) report(id, false, "toy model unavailable", e.what());
    return 1;
  }
  guarded(4, [&] { criterion_cg(model); });
  guarded(5, [&] { criteria_orderings(model); });
  guarded(7, [&] { criterion_cosine(model); });
  guarded(11, [&] { criterion_determinism(model, work); });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
