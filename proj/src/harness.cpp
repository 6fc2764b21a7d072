#include "previewflow/harness.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "previewflow/error.hpp"
#include "previewflow/kernels.hpp"
#include "previewflow/metrics.hpp"
#include "previewflow/tensor_io.hpp"
#include "previewflow/velocity.hpp"

namespace fs = std::filesystem;

namespace pflow {
namespace {

using ojson = nlohmann::ordered_json;

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T read(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

Padding padding_from_string(const std::string& s) {
  if (s == "reflect") return Padding::Reflect;
  if (s == "circular") return Padding::Circular;
  if (s == "zero") return Padding::Zero;
  throw ConfigError("unknown padding '" + s + "'");
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

void write_config_snapshot(const ExperimentConfig& cfg, CommandResult& result) {
  const fs::path out(cfg.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  io::write_text_atomic(out / "config.json", cfg.to_json().dump(2) + "\n");
  result.written.push_back(out / "config.json");
}

std::unique_ptr<BlobDataset> dataset_for(const VelocityField& field, const GridShape& shape) {
  if (field.condition_arity() == 0) return nullptr;
  return std::make_unique<BlobDataset>(shape.d);
}

std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::string stats_row(const MeanStd& s) {
  return format_double(s.mean) + "," + format_double(s.stddev);
}

// Replaces `dir` with the contents of a freshly written sibling.
void commit_dir(const fs::path& tmp, const fs::path& dir) {
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + dir.string() + ": " + ec.message());
}

void write_seed_outputs(const ExperimentConfig& cfg, const SeedRun& run, const fs::path& dir) {
  const fs::path tmp = dir.string() + ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());

  const bool timing = !kernels::deterministic_mode();
  ojson report;
  report["seed"] = run.seed;
  report["hr"] = {{"hr_evals", run.hr.ledger.hr_evals()},
                  {"lr_evals", run.hr.ledger.lr_evals()},
                  {"cost_units", run.hr.ledger.cost_units(cfg.preview.cost_model)}};
  ojson methods = ojson::array();
  for (const auto& m : run.methods) {
    ojson j = m.report.to_json(timing);
    j["psnr"] = m.psnr;
    j["piqe"] = m.piqe;
    methods.push_back(j);
  }
  report["methods"] = methods;
  io::write_text_atomic(tmp / "report.json", report.dump(2) + "\n");

  io::write_grid(tmp / "hr", run.hr.final);
  for (const auto& m : run.methods) io::write_grid(tmp / m.method, m.report.final);
  if (cfg.export_images) {
    io::write_image(tmp / "hr_image", to_image(run.hr.final));
    for (const auto& m : run.methods) {
      io::write_image(tmp / (m.method + "_image"), to_image(m.report.final));
    }
  }
  commit_dir(tmp, dir);
}

struct Variant {
  std::string name;
  MethodSpec spec;
};

std::string variant_header() {
  return "variant,selection,guidance,m,alpha,k,n,cost_units,speedup,psnr_mean,psnr_std,piqe_mean,"
         "piqe_std\n";
}

std::vector<Variant> ablation_variants(const ExperimentConfig& cfg) {
  std::vector<Variant> out;
  auto add = [&](std::string name, PreviewConfig pc) {
    MethodSpec spec;
    spec.name = name;
    spec.config = std::move(pc);
    out.push_back({std::move(name), std::move(spec)});
  };
  const std::string& axis = cfg.ablate.axis;
  if (axis == "selection") {
    for (auto s : {SelectionStrategy::Nearest, SelectionStrategy::Random, SelectionStrategy::Argmax,
                   SelectionStrategy::Argmin}) {
      PreviewConfig pc = cfg.preview;
      pc.selection = s;
      add(to_string(s), pc);
    }
  } else if (axis == "cg") {
    for (bool g : {false, true}) {
      PreviewConfig pc = cfg.preview;
      pc.guidance = g;
      add(g ? "cg-on" : "cg-off", pc);
    }
  } else if (axis == "m-alpha") {
    for (int m : cfg.ablate.m_values) {
      for (double a : cfg.ablate.alpha_values) {
        PreviewConfig pc = cfg.preview;
        pc.m = m;
        pc.alpha = a;
        add("m" + std::to_string(m) + "-a" + format_double(a), pc);
      }
    }
  } else if (axis == "k") {
    for (int k : cfg.ablate.k_values) {
      PreviewConfig pc = cfg.preview;
      pc.k = k;
      add("k" + std::to_string(k), pc);
    }
  } else {
    throw ConfigError("ablate: unknown axis '" + axis + "' (selection, cg, m-alpha, k)");
  }
  return out;
}

std::vector<SeedRun> run_and_store(const ExperimentConfig& cfg, const VelocityField& field,
                                   const std::vector<MethodSpec>& methods, bool store,
                                   CommandResult& result) {
  auto dataset = dataset_for(field, cfg.grid);
  const fs::path seeds_dir = fs::path(cfg.out) / "seeds";
  if (store) {
    std::error_code ec;
    fs::create_directories(seeds_dir, ec);
    if (ec) throw IoError("cannot create " + seeds_dir.string() + ": " + ec.message());
  }
  std::vector<SeedRun> runs(cfg.seeds.size());
  std::vector<std::string> errors(cfg.seeds.size());
  std::vector<int> kinds(cfg.seeds.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cfg.seeds.size()); ++i) {
    try {
      runs[i] = run_seed(field, cfg.grid, cfg.seeds[i], dataset.get(), methods);
      runs[i].hr.trajectory = {};
      if (store) write_seed_outputs(cfg, runs[i], seeds_dir / seed_dir_name(cfg.seeds[i]));
    } catch (const std::exception& e) {
      errors[i] = e.what();
      kinds[i] = exit_code_for(e);
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty()) continue;
    const std::string msg = "seed " + std::to_string(cfg.seeds[i]) + ": " + errors[i];
    if (kinds[i] == 3) throw IoError(msg);
    if (kinds[i] == 1) throw ContractError(msg);
    throw IntegrationError(msg, 0);
  }
  if (store) {
    for (auto s : cfg.seeds) result.written.push_back(seeds_dir / seed_dir_name(s));
  }
  return runs;
}

}  // namespace

nlohmann::ordered_json FieldSpec::to_json() const {
  ojson j;
  j["kind"] = kind;
  if (kind == "toy-net") {
    j["checkpoint"] = checkpoint;
  } else if (kind == "analytic-blur") {
    j["padding"] = padding;
    j["gain"] = gain;
  } else if (kind == "analytic-channel-affine") {
    j["scale"] = scale;
    j["bias"] = bias;
  } else if (kind == "gaussian-oracle") {
    j["mean"] = mean;
    j["std"] = std;
  }
  return j;
}

FieldSpec FieldSpec::from_json(const nlohmann::json& j) {
  const std::string where = "field";
  FieldSpec f;
  f.kind = read<std::string>(j, "kind", f.kind, where);
  if (f.kind == "toy-net") {
    check_keys(j, {"kind", "checkpoint"}, where);
    f.checkpoint = read<std::string>(j, "checkpoint", f.checkpoint, where);
  } else if (f.kind == "analytic-blur") {
    check_keys(j, {"kind", "padding", "gain"}, where);
    f.padding = read<std::string>(j, "padding", f.padding, where);
    padding_from_string(f.padding);
    f.gain = read<double>(j, "gain", f.gain, where);
  } else if (f.kind == "analytic-channel-affine") {
    check_keys(j, {"kind", "scale", "bias"}, where);
    f.scale = read<double>(j, "scale", f.scale, where);
    f.bias = read<double>(j, "bias", f.bias, where);
  } else if (f.kind == "gaussian-oracle") {
    check_keys(j, {"kind", "mean", "std"}, where);
    f.mean = read<double>(j, "mean", f.mean, where);
    f.std = read<double>(j, "std", f.std, where);
    if (!(f.std > 0.0)) throw ConfigError("field: std must be positive");
  } else {
    throw ConfigError("field: unknown kind '" + f.kind + "'");
  }
  return f;
}

nlohmann::ordered_json AblateSpec::to_json() const {
  return ojson{{"axis", axis}, {"m_values", m_values}, {"alpha_values", alpha_values},
               {"k_values", k_values}};
}

AblateSpec AblateSpec::from_json(const nlohmann::json& j) {
  const std::string where = "ablate";
  check_keys(j, {"axis", "m_values", "alpha_values", "k_values"}, where);
  AblateSpec a;
  a.axis = read(j, "axis", a.axis, where);
  a.m_values = read(j, "m_values", a.m_values, where);
  a.alpha_values = read(j, "alpha_values", a.alpha_values, where);
  a.k_values = read(j, "k_values", a.k_values, where);
  return a;
}

nlohmann::ordered_json StatsSpec::to_json() const { return ojson{{"study", study}, {"span", span}}; }

StatsSpec StatsSpec::from_json(const nlohmann::json& j) {
  const std::string where = "stats";
  check_keys(j, {"study", "span"}, where);
  StatsSpec s;
  s.study = read(j, "study", s.study, where);
  s.span = read(j, "span", s.span, where);
  if (s.study != "cg" && s.study != "cosine") {
    throw ConfigError("stats: unknown study '" + s.study + "' (cg, cosine)");
  }
  if (s.span < 0) throw ConfigError("stats: span must be non-negative");
  return s;
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  ojson j;
  j["schema_version"] = schema_version;
  j["command"] = command;
  j["field"] = field.to_json();
  j["grid"] = {{"h", grid.h}, {"w", grid.w}, {"d", grid.d}};
  ojson p;
  p["n"] = preview.n;
  p["schedule"] = preview.schedule ? ojson(preview.schedule->times()) : ojson(nullptr);
  p["d"] = preview.d;
  p["s"] = preview.s;
  p["m"] = preview.m;
  p["alpha"] = preview.alpha;
  p["k"] = preview.k;
  p["family_mode"] = to_string(preview.family_mode);
  p["selection"] = to_string(preview.selection);
  p["guidance"] = preview.guidance;
  p["decorrelate"] = preview.decorrelate;
  j["preview"] = p;
  j["baselines"] = baselines;
  j["reduced_n"] = reduced_n;
  j["seeds"] = seeds;
  j["out"] = out;
  j["cost_model"] = to_string(preview.cost_model);
  j["export_images"] = export_images;
  j["architecture"] = architecture.to_json();
  j["train"] = train.to_json();
  j["ablate"] = ablate.to_json();
  j["stats"] = stats.to_json();
  j["runs"] = runs;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  const std::string where = "config";
  check_keys(j,
             {"schema_version", "command", "field", "grid", "preview", "baselines", "reduced_n",
              "seeds", "out", "cost_model", "export_images", "architecture", "train", "ablate",
              "stats", "runs"},
             where);
  if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
  ExperimentConfig c;
  c.schema_version = read<int>(j, "schema_version", 0, where);
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version " + std::to_string(c.schema_version));
  }
  c.command = read(j, "command", c.command, where);
  if (j.contains("field")) c.field = FieldSpec::from_json(j.at("field"));
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, {"h", "w", "d"}, "grid");
    c.grid.h = read(g, "h", c.grid.h, "grid");
    c.grid.w = read(g, "w", c.grid.w, "grid");
    c.grid.d = read(g, "d", c.grid.d, "grid");
    if (c.grid.h <= 0 || c.grid.w <= 0 || c.grid.d <= 0) {
      throw ConfigError("grid: dimensions must be positive");
    }
  }
  if (j.contains("preview")) {
    const auto& p = j.at("preview");
    const std::string pw = "preview";
    check_keys(p,
               {"n", "schedule", "d", "s", "m", "alpha", "k", "family_mode", "selection", "guidance",
                "decorrelate"},
               pw);
    c.preview.n = read(p, "n", c.preview.n, pw);
    if (p.contains("schedule") && !p.at("schedule").is_null()) {
      try {
        c.preview.schedule = TimestepSchedule(read<std::vector<double>>(p, "schedule", {}, pw));
      } catch (const ContractError& e) {
        throw ConfigError(std::string("preview: ") + e.what());
      }
    }
    c.preview.d = read(p, "d", c.preview.d, pw);
    c.preview.s = read(p, "s", c.preview.s, pw);
    c.preview.m = read(p, "m", c.preview.m, pw);
    c.preview.alpha = read(p, "alpha", c.preview.alpha, pw);
    c.preview.k = read(p, "k", c.preview.k, pw);
    c.preview.family_mode =
        family_mode_from_string(read<std::string>(p, "family_mode", "per-block", pw));
    c.preview.selection =
        selection_strategy_from_string(read<std::string>(p, "selection", "argmin", pw));
    c.preview.guidance = read(p, "guidance", c.preview.guidance, pw);
    c.preview.decorrelate = read(p, "decorrelate", c.preview.decorrelate, pw);
  }
  c.baselines = read(j, "baselines", c.baselines, where);
  for (const auto& b : c.baselines) baseline_kind_from_string(b);
  c.reduced_n = read(j, "reduced_n", c.reduced_n, where);
  c.seeds = read(j, "seeds", c.seeds, where);
  c.out = read(j, "out", c.out, where);
  c.preview.cost_model = cost_model_from_string(read<std::string>(j, "cost_model", "linear", where));
  c.export_images = read(j, "export_images", c.export_images, where);
  if (j.contains("architecture")) c.architecture = ToyNetConfig::from_json(j.at("architecture"));
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("ablate")) c.ablate = AblateSpec::from_json(j.at("ablate"));
  if (j.contains("stats")) c.stats = StatsSpec::from_json(j.at("stats"));
  c.runs = read(j, "runs", c.runs, where);
  try {
    c.preview.validate(c.grid.h, c.grid.w);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("preview: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  const std::string text = io::read_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  auto number = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("bad seed list '" + text + "'");
    }
    return std::stoull(s);
  };
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(item));
      continue;
    }
    const std::uint64_t lo = number(item.substr(0, dash));
    const std::uint64_t hi = number(item.substr(dash + 1));
    if (hi < lo) throw ConfigError("bad seed range '" + item + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const UnpairedRunError*>(&e)) return 3;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ContractError*>(&e) ||
      dynamic_cast<const DivisibilityError*>(&e) || dynamic_cast<const DimensionError*>(&e)) {
    return 1;
  }
  return 2;
}

std::shared_ptr<VelocityField> make_field(const FieldSpec& spec, const fs::path& base) {
  if (spec.kind == "toy-net") {
    fs::path p(spec.checkpoint);
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw IoError("missing checkpoint " + p.string());
    auto net = std::make_shared<ToyNet>(ToyNet::load(p));
    return std::make_shared<ToyNetField>(std::move(net));
  }
  if (spec.kind == "analytic-blur") {
    return std::make_shared<BlurField>(padding_from_string(spec.padding),
                                       static_cast<float>(spec.gain));
  }
  if (spec.kind == "analytic-channel-affine") {
    ChannelAffineField f = ChannelAffineField::scaled_identity(3, static_cast<float>(spec.scale));
    return std::make_shared<ChannelAffineField>(
        3, f.matrix(), std::vector<float>(3, static_cast<float>(spec.bias)));
  }
  if (spec.kind == "gaussian-oracle") {
    return std::make_shared<GaussianOracleField>(spec.mean, spec.std);
  }
  throw ConfigError("unknown field kind '" + spec.kind + "'");
}

std::vector<MethodSpec> preview_methods(const ExperimentConfig& cfg) {
  std::vector<MethodSpec> out;
  MethodSpec ours;
  ours.name = "ours";
  ours.config = cfg.preview;
  out.push_back(ours);
  for (const auto& b : cfg.baselines) {
    MethodSpec m;
    m.name = b;
    m.kind = MethodSpec::Kind::Baseline;
    m.baseline = baseline_kind_from_string(b);
    m.config = cfg.preview;
    m.baseline_params.reduced_n = cfg.reduced_n;
    out.push_back(m);
  }
  return out;
}

CommandResult cmd_train(const ExperimentConfig& cfg) {
  CommandResult result;
  write_config_snapshot(cfg, result);
  const fs::path out(cfg.out);
  BlobDataset dataset(cfg.architecture.channels);
  std::vector<double> trace;
  auto write_trace = [&] {
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
      csv += std::to_string(i) + "," + format_double(trace[i]) + "\n";
    }
    io::write_text_atomic(out / "loss_trace.csv", csv);
    result.written.push_back(out / "loss_trace.csv");
  };
  TrainResult trained;
  try {
    trained = train_toy(dataset, cfg.architecture, cfg.train,
                        [&](int, double loss) { trace.push_back(loss); });
  } catch (const TrainingError&) {
    write_trace();
    throw;
  }
  write_trace();
  const fs::path ckpt = out / "checkpoint.ckpt";
  ojson training = cfg.train.to_json();
  training["initial_loss"] = trained.initial_loss;
  training["final_loss"] = trained.final_loss;
  const fs::path tmp = ckpt.string() + ".tmp";
  trained.net->save(tmp, training, cfg.train.seed);
  std::error_code ec;
  fs::rename(tmp, ckpt, ec);
  if (ec) throw IoError("cannot write " + ckpt.string() + ": " + ec.message());
  result.written.push_back(ckpt);
  return result;
}

CommandResult cmd_preview(const ExperimentConfig& cfg) {
  CommandResult result;
  write_config_snapshot(cfg, result);
  auto field = make_field(cfg.field, fs::current_path());
  const auto methods = preview_methods(cfg);
  const auto runs = run_and_store(cfg, *field, methods, true, result);

  std::string csv =
      "seed,method,selected,hr_evals,lr_evals,cost_units,speedup,psnr,piqe,norm_td,norm_tdm,"
      "compliance_relative\n";
  for (const auto& run : runs) {
    for (const auto& m : run.methods) {
      const RunReport& r = m.report;
      const double cost = r.cost_units();
      csv += std::to_string(run.seed) + "," + m.method + "," +
             (r.selected ? std::to_string(*r.selected) : std::string()) + "," +
             std::to_string(r.ledger.hr_evals()) + "," + std::to_string(r.ledger.lr_evals()) + "," +
             format_double(cost) + "," + format_double(cfg.preview.n / cost) + "," +
             format_double(m.psnr) + "," + format_double(m.piqe) + "," + opt_csv(r.norm_at_td) +
             "," + opt_csv(r.norm_at_tdm) + "," + opt_csv(r.compliance_relative) + "\n";
    }
  }
  const fs::path agg = fs::path(cfg.out) / "aggregate.csv";
  io::write_text_atomic(agg, csv);
  result.written.push_back(agg);
  return result;
}

CommandResult cmd_compare(const ExperimentConfig& cfg) {
  if (cfg.runs.empty()) throw ConfigError("compare: no run directories given");
  CommandResult result;
  write_config_snapshot(cfg, result);
  const fs::path ref_dir(cfg.runs.front());
  const ExperimentConfig ref = ExperimentConfig::load(ref_dir / "config.json");

  struct Row {
    std::string label;
    std::vector<double> psnr;
    std::vector<double> piqe;
    double cost = 0.0;
    int full_nfe = 0;
  };
  std::vector<Row> rows;
  for (const auto& dir_name : cfg.runs) {
    const fs::path dir(dir_name);
    const ExperimentConfig run_cfg = ExperimentConfig::load(dir / "config.json");
    std::vector<std::string> names = {"hr"};
    for (const auto& m : preview_methods(run_cfg)) names.push_back(m.name);
    const std::string prefix = cfg.runs.size() > 1 ? dir.filename().string() + ":" : "";
    std::vector<Row> local(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      local[i].label = prefix + names[i];
      local[i].full_nfe = run_cfg.preview.n;
    }
    for (auto seed : ref.seeds) {
      const fs::path ref_seed = ref_dir / "seeds" / seed_dir_name(seed);
      const fs::path run_seed_dir = dir / "seeds" / seed_dir_name(seed);
      auto load = [&](const fs::path& stem, const std::string& what) {
        if (!fs::exists(stem.string() + ".f32")) {
          throw UnpairedRunError("seed " + std::to_string(seed) + ": missing " + what + " grid in " +
                                 stem.parent_path().string());
        }
        return io::read_grid(stem);
      };
      const LatentGrid hr = load(ref_seed / "hr", "hr");
      nlohmann::json report;
      try {
        report = nlohmann::json::parse(io::read_text(run_seed_dir / "report.json"));
      } catch (const IoError&) {
        throw UnpairedRunError("seed " + std::to_string(seed) + ": missing report in " +
                               run_seed_dir.string());
      }
      for (std::size_t i = 0; i < names.size(); ++i) {
        const LatentGrid out = load(run_seed_dir / names[i], names[i]);
        if (out.h() != hr.h() && out.h() * run_cfg.preview.s != hr.h()) {
          throw UnpairedRunError("seed " + std::to_string(seed) + ": " + names[i] +
                                 " grid does not match the reference resolution");
        }
        local[i].psnr.push_back(preview_psnr(out, hr, run_cfg.preview.s));
        const LatentGrid image = to_image(out);
        if (image.h() >= 8 && image.w() >= 8) local[i].piqe.push_back(piqe(image, 8));
        if (i == 0) {
          local[i].cost = report.at("hr").at("cost_units").get<double>();
        } else {
          for (const auto& m : report.at("methods")) {
            if (m.at("method").get<std::string>() == names[i]) {
              local[i].cost = m.at("cost_units").get<double>();
            }
          }
        }
      }
    }
    for (auto& r : local) rows.push_back(std::move(r));
  }

  std::string csv = "method,n,cost_units,speedup,piqe_mean,piqe_std,psnr_mean,psnr_std\n";
  for (const auto& r : rows) {
    csv += r.label + "," + std::to_string(r.psnr.size()) + "," + format_double(r.cost) + "," +
           format_double(r.cost > 0.0 ? r.full_nfe / r.cost : 0.0) + "," +
           stats_row(mean_std(r.piqe)) + "," + stats_row(mean_std(r.psnr)) + "\n";
  }
  const fs::path path = fs::path(cfg.out) / "compare.csv";
  io::write_text_atomic(path, csv);
  result.written.push_back(path);
  return result;
}

CommandResult cmd_ablate(const ExperimentConfig& cfg) {
  const auto variants = ablation_variants(cfg);
  CommandResult result;
  write_config_snapshot(cfg, result);
  auto field = make_field(cfg.field, fs::current_path());
  std::vector<MethodSpec> methods;
  for (const auto& v : variants) methods.push_back(v.spec);
  const auto runs = run_and_store(cfg, *field, methods, false, result);
  const auto summary = summarize(runs, cfg.preview.n);

  std::string csv = variant_header();
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const PreviewConfig& pc = variants[i].spec.config;
    const MethodSummary& s = summary[i];
    csv += variants[i].name + "," + to_string(pc.selection) + "," + (pc.guidance ? "on" : "off") +
           "," + std::to_string(pc.m) + "," + format_double(pc.alpha) + "," +
           std::to_string(pc.k) + "," + std::to_string(s.n) + "," + format_double(s.cost_units) +
           "," + format_double(s.speedup) + "," + stats_row(s.psnr) + "," + stats_row(s.piqe) +
           "\n";
  }
  const fs::path path = fs::path(cfg.out) / ("ablate_" + cfg.ablate.axis + ".csv");
  io::write_text_atomic(path, csv);
  result.written.push_back(path);

  std::string per_seed = "seed,variant,psnr,piqe,cost_units\n";
  for (const auto& run : runs) {
    for (const auto& m : run.methods) {
      per_seed += std::to_string(run.seed) + "," + m.method + "," + format_double(m.psnr) + "," +
                  format_double(m.piqe) + "," + format_double(m.report.cost_units()) + "\n";
    }
  }
  const fs::path seeds_path = fs::path(cfg.out) / ("ablate_" + cfg.ablate.axis + "_seeds.csv");
  io::write_text_atomic(seeds_path, per_seed);
  result.written.push_back(seeds_path);
  return result;
}

CommandResult cmd_stats(const ExperimentConfig& cfg) {
  CommandResult result;
  write_config_snapshot(cfg, result);
  auto field = make_field(cfg.field, fs::current_path());
  auto dataset = dataset_for(*field, cfg.grid);
  const fs::path out(cfg.out);
  if (cfg.stats.study == "cg") {
    const auto report = cg_effect_study(*field, cfg.grid, cfg.preview, cfg.seeds, dataset.get());
    io::write_text_atomic(out / "cg_study.csv", report.csv());
    io::write_text_atomic(out / "cg_summary.json", report.summary().dump(2) + "\n");
    result.written.push_back(out / "cg_study.csv");
    result.written.push_back(out / "cg_summary.json");
    return result;
  }
  const auto trace =
      cosine_study(*field, cfg.grid, cfg.preview, cfg.seeds, dataset.get(), cfg.stats.span);
  std::string csv = "k,mean,std\n";
  ojson summary = ojson::array();
  for (const auto& p : trace) {
    csv += std::to_string(p.k) + "," + format_double(p.mean) + "," + format_double(p.stddev) + "\n";
    summary.push_back({{"metric", "cosine_k" + std::to_string(p.k)},
                       {"n", cfg.seeds.size()},
                       {"mean", p.mean},
                       {"std", p.stddev},
                       {"W", nullptr},
                       {"p", nullptr}});
  }
  io::write_text_atomic(out / "cosine_trace.csv", csv);
  io::write_text_atomic(out / "cosine_summary.json", summary.dump(2) + "\n");
  result.written.push_back(out / "cosine_trace.csv");
  result.written.push_back(out / "cosine_summary.json");
  return result;
}

CommandResult run_command(const ExperimentConfig& cfg) {
  if (cfg.command == "train") return cmd_train(cfg);
  if (cfg.command == "preview") return cmd_preview(cfg);
  if (cfg.command == "compare") return cmd_compare(cfg);
  if (cfg.command == "ablate") return cmd_ablate(cfg);
  if (cfg.command == "stats") return cmd_stats(cfg);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

}  // namespace pflow
