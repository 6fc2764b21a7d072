#include "previewflow/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "previewflow/error.hpp"

namespace pflow {

LatentGrid cfm_target(const LatentGrid& x0, const LatentGrid& x1) {
  require_same_shape(x0, x1, "cfm_target");
  LatentGrid u = x1 - x0;
  u.set_t(0.0);
  return u;
}

namespace {

LatentGrid interpolate(const LatentGrid& x0, const LatentGrid& x1, double t) {
  LatentGrid xt(x0.h(), x0.w(), x0.d(), t);
  auto a = x0.data();
  auto b = x1.data();
  auto o = xt.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<float>((1.0 - t) * a[i] + t * b[i]);
  }
  return xt;
}

}  // namespace

double cfm_loss(const VelocityField& field, const LatentGrid& x0, const LatentGrid& x1, double t,
                std::span<const float> cond) {
  require_same_shape(x0, x1, "cfm_loss");
  if (!(t >= 0.0 && t <= 1.0)) throw ContractError("cfm_loss: t outside [0, 1]");
  const LatentGrid v = field.eval(interpolate(x0, x1, t), t, cond);
  const LatentGrid u = cfm_target(x0, x1);
  double acc = 0.0;
  auto vv = v.data();
  auto uv = u.data();
  for (std::size_t i = 0; i < vv.size(); ++i) {
    const double r = static_cast<double>(vv[i]) - uv[i];
    acc += r * r;
  }
  return acc / static_cast<double>(vv.size());
}

double grad_check(const VelocityField& field, int probes, SeededRng& rng, int size) {
  const auto* net_field = dynamic_cast<const ToyNetField*>(&field);
  if (net_field == nullptr) throw ContractError("grad_check requires a trainable toy-net field");
  if (probes < 1) throw ContractError("grad_check needs at least one probe");
  const ToyNet& net = net_field->net();
  const int d = net.config().channels;

  const LatentGrid x0 = gaussian_noise(size, size, d, rng);
  LatentGrid x1 = gaussian_noise(size, size, d, rng);
  const double t = 0.1 + 0.8 * rng.uniform();
  Condition cond(net.config().condition_arity);
  for (float& c : cond) c = static_cast<float>(rng.uniform());
  const LatentGrid xt = interpolate(x0, x1, t);
  const LatentGrid target = cfm_target(x0, x1);

  std::vector<double> params(net.params().begin(), net.params().end());
  std::vector<double> grad(params.size(), 0.0);
  net.loss_and_grad<double>(params, xt, t, cond, target, grad);

  constexpr double kStep = 1e-3;
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t i = rng.below(params.size());
    const double saved = params[i];
    params[i] = saved + kStep;
    const double up = net.loss_and_grad<double>(params, xt, t, cond, target, std::span<double>{});
    params[i] = saved - kStep;
    const double down = net.loss_and_grad<double>(params, xt, t, cond, target, std::span<double>{});
    params[i] = saved;
    const double fd = (up - down) / (2.0 * kStep);
    worst = std::max(worst, std::abs(grad[i] - fd) / (std::abs(fd) + 1e-8));
  }
  return worst;
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("train: lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be > 0");
  if (batch_hr < 0 || batch_lr < 0 || batch_hr + batch_lr < 1) {
    throw ConfigError("train: need at least one sample per batch");
  }
  if (hr_size < 1 || lr_size < 1 || probe_samples < 1) {
    throw ConfigError("train: sizes must be >= 1");
  }
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["steps"] = steps;
  j["lr"] = lr;
  j["momentum"] = momentum;
  j["clip_norm"] = clip_norm;
  j["batch_hr"] = batch_hr;
  j["batch_lr"] = batch_lr;
  j["hr_size"] = hr_size;
  j["lr_size"] = lr_size;
  j["probe_samples"] = probe_samples;
  j["seed"] = seed;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {"steps",    "lr",      "momentum", "clip_norm",
                                                 "batch_hr", "batch_lr", "hr_size",  "lr_size",
                                                 "probe_samples", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("train: unknown key '" + it.key() + "'");
    }
  }
  TrainConfig c;
  try {
    c.steps = j.value("steps", c.steps);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.batch_hr = j.value("batch_hr", c.batch_hr);
    c.batch_lr = j.value("batch_lr", c.batch_lr);
    c.hr_size = j.value("hr_size", c.hr_size);
    c.lr_size = j.value("lr_size", c.lr_size);
    c.probe_samples = j.value("probe_samples", c.probe_samples);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

struct Example {
  LatentGrid xt;
  LatentGrid target;
  Condition cond;
  double t;
};

Example draw_example(const BlobDataset& dataset, int size, SeededRng& data_rng, SeededRng& noise_rng) {
  const BlobSample s = dataset.sample(data_rng);
  const LatentGrid x1 = BlobDataset::to_model_space(dataset.render(s, size, size));
  const LatentGrid x0 = gaussian_noise(size, size, dataset.channels(), noise_rng);
  const double t = data_rng.uniform();
  return {interpolate(x0, x1, t), cfm_target(x0, x1), s.condition, t};
}

std::vector<Example> probe_batch(const BlobDataset& dataset, const TrainConfig& cfg) {
  SeededRng data_rng(cfg.seed, streams::kProbe);
  SeededRng noise_rng(cfg.seed, streams::kProbe + 1000);
  std::vector<Example> batch;
  for (int i = 0; i < cfg.probe_samples; ++i) {
    const int size = (i % 2 == 0 || cfg.batch_lr == 0) ? cfg.hr_size : cfg.lr_size;
    batch.push_back(draw_example(dataset, size, data_rng, noise_rng));
  }
  return batch;
}

double batch_loss(const ToyNet& net, const std::vector<Example>& batch) {
  double total = 0.0;
  for (const auto& ex : batch) {
    total += net.loss_and_grad<float>(net.params(), ex.xt, ex.t, ex.cond, ex.target,
                                      std::span<float>{});
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace

double probe_loss(const ToyNet& net, const BlobDataset& dataset, const TrainConfig& cfg) {
  return batch_loss(net, probe_batch(dataset, cfg));
}

TrainResult train_toy(const BlobDataset& dataset, const ToyNetConfig& arch, const TrainConfig& cfg,
                      const TrainObserver& observer) {
  cfg.validate();
  if (arch.channels != dataset.channels() || arch.condition_arity != dataset.condition_arity()) {
    throw ConfigError("train: architecture does not match dataset channels/condition arity");
  }
  const auto start = std::chrono::steady_clock::now();
  SeededRng init_rng(cfg.seed, streams::kInit);
  SeededRng data_rng(cfg.seed, streams::kData);
  SeededRng noise_rng(cfg.seed, streams::kNoise);

  TrainResult result;
  result.net = std::make_shared<ToyNet>(ToyNet::initialize(arch, init_rng));
  ToyNet& net = *result.net;
  const auto probe = probe_batch(dataset, cfg);
  result.initial_loss = batch_loss(net, probe);

  const std::size_t n = net.params().size();
  std::vector<float> velocity(n, 0.0f);
  const int batch = cfg.batch_hr + cfg.batch_lr;

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Example> examples;
    examples.reserve(batch);
    for (int i = 0; i < batch; ++i) {
      const int size = i < cfg.batch_hr ? cfg.hr_size : cfg.lr_size;
      examples.push_back(draw_example(dataset, size, data_rng, noise_rng));
    }
    // Per-sample gradients, reduced in sample order so the result does not
    // depend on the thread count.
    std::vector<std::vector<float>> grads(batch, std::vector<float>(n, 0.0f));
    std::vector<double> losses(batch, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < batch; ++i) {
      losses[i] = net.loss_and_grad<float>(net.params(), examples[i].xt, examples[i].t,
                                           examples[i].cond, examples[i].target, grads[i],
                                           1.0 / batch);
    }
    double loss = 0.0;
    for (double l : losses) loss += l;
    loss /= batch;
    if (!std::isfinite(loss)) {
      throw TrainingError("training diverged: non-finite loss", static_cast<std::size_t>(step));
    }
    std::vector<float> grad(n, 0.0f);
    for (int i = 0; i < batch; ++i) {
      for (std::size_t p = 0; p < n; ++p) grad[p] += grads[i][p];
    }
    double norm2 = 0.0;
    for (float g : grad) norm2 += static_cast<double>(g) * g;
    const double norm = std::sqrt(norm2);
    const float clip = norm > cfg.clip_norm ? static_cast<float>(cfg.clip_norm / norm) : 1.0f;
    auto params = net.mutable_params();
    const float lr = static_cast<float>(cfg.lr);
    const float mom = static_cast<float>(cfg.momentum);
    for (std::size_t p = 0; p < n; ++p) {
      velocity[p] = mom * velocity[p] + clip * grad[p];
      params[p] -= lr * velocity[p];
    }
    result.loss_trace.push_back(loss);
    if (observer) observer(step, loss);
  }

  result.final_loss = batch_loss(net, probe);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace pflow
