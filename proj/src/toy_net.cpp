#include "previewflow/toy_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "previewflow/error.hpp"
#include "previewflow/kernels.hpp"
#include "previewflow/tensor_io.hpp"

namespace pflow {

namespace {

constexpr char kMagic[] = "PFLOWCKPT\n";

template <typename T>
inline T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

}  // namespace

int ToyNetConfig::input_channels() const {
  return channels + (coordinate_channels ? 2 : 0) + time_features + condition_arity;
}

void ToyNetConfig::validate() const {
  if (channels < 1) throw ConfigError("toy net: channels must be >= 1");
  if (condition_arity < 0 || time_features < 0) {
    throw ConfigError("toy net: condition arity and time features must be >= 0");
  }
  if (dilations.size() != hidden.size() + 1) {
    throw ConfigError("toy net: need exactly one dilation per layer");
  }
  for (int h : hidden) {
    if (h < 1) throw ConfigError("toy net: hidden widths must be >= 1");
  }
  for (int d : dilations) {
    if (d < 1) throw ConfigError("toy net: dilations must be >= 1");
  }
  if (ToyNet::parameter_count(*this) > kMaxToyParameters) {
    throw ConfigError("toy net: parameter count exceeds the desk-scale limit");
  }
}

nlohmann::ordered_json ToyNetConfig::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = "conv-coord";
  j["channels"] = channels;
  j["condition_arity"] = condition_arity;
  j["time_features"] = time_features;
  j["coordinate_channels"] = coordinate_channels;
  j["hidden"] = hidden;
  j["dilations"] = dilations;
  return j;
}

ToyNetConfig ToyNetConfig::from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {"name",          "channels",
                                                 "condition_arity", "time_features",
                                                 "coordinate_channels", "hidden",
                                                 "dilations"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("toy net: unknown architecture key '" + it.key() + "'");
    }
  }
  ToyNetConfig c;
  try {
    if (j.contains("name") && j.at("name").get<std::string>() != "conv-coord") {
      throw ConfigError("toy net: unknown architecture '" + j.at("name").get<std::string>() + "'");
    }
    c.channels = j.value("channels", c.channels);
    c.condition_arity = j.value("condition_arity", c.condition_arity);
    c.time_features = j.value("time_features", c.time_features);
    c.coordinate_channels = j.value("coordinate_channels", c.coordinate_channels);
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("dilations")) c.dilations = j.at("dilations").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("toy net: ") + e.what());
  }
  c.validate();
  return c;
}

std::size_t ToyNet::parameter_count(const ToyNetConfig& config) {
  std::size_t n = 0;
  int cin = config.input_channels();
  for (int l = 0; l < config.layers(); ++l) {
    const int cout = l + 1 < config.layers() ? config.hidden[l] : config.channels;
    n += static_cast<std::size_t>(9) * cin * cout + cout;
    cin = cout;
  }
  return n;
}

ToyNet::ToyNet(ToyNetConfig config, std::vector<float> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  if (params_.size() != parameter_count(config_)) {
    throw DimensionError("toy net: parameter vector has wrong length");
  }
  for (float p : params_) {
    if (!std::isfinite(p)) throw ContractError("toy net: non-finite weight");
  }
  std::size_t offset = 0;
  int cin = config_.input_channels();
  for (int l = 0; l < config_.layers(); ++l) {
    const int cout = l + 1 < config_.layers() ? config_.hidden[l] : config_.channels;
    LayerView v{cin, cout, config_.dilations[l], offset, 0};
    offset += static_cast<std::size_t>(9) * cin * cout;
    v.bias_offset = offset;
    offset += cout;
    layers_.push_back(v);
    cin = cout;
  }
}

ToyNet ToyNet::initialize(const ToyNetConfig& config, SeededRng& rng) {
  config.validate();
  std::vector<float> params(parameter_count(config), 0.0f);
  std::size_t offset = 0;
  int cin = config.input_channels();
  for (int l = 0; l < config.layers(); ++l) {
    const bool last = l + 1 == config.layers();
    const int cout = last ? config.channels : config.hidden[l];
    const double fan_in = 9.0 * cin;
    const double stddev = (last ? 0.5 : std::sqrt(2.0)) / std::sqrt(fan_in);
    const std::size_t count = static_cast<std::size_t>(9) * cin * cout;
    for (std::size_t i = 0; i < count; ++i) {
      params[offset + i] = static_cast<float>(stddev * rng.normal());
    }
    offset += count + cout;  // biases start at zero
    cin = cout;
  }
  return ToyNet(config, std::move(params));
}

template <typename T>
std::vector<T> ToyNet::build_input(const LatentGrid& x, double t, std::span<const float> cond) const {
  if (x.d() != config_.channels) throw DimensionError("toy net: channel count mismatch");
  if (static_cast<int>(cond.size()) != config_.condition_arity) {
    throw ContractError("toy net: condition arity mismatch");
  }
  const int cin = config_.input_channels();
  std::vector<T> in(static_cast<std::size_t>(x.positions()) * cin);
  std::vector<T> time(config_.time_features);
  for (int f = 0; f < config_.time_features; ++f) {
    // Alternating sin/cos at frequencies pi/2, pi, 3pi/2, ...; feature 0 is
    // the shifted time itself.
    if (f == 0) {
      time[f] = static_cast<T>(2.0 * t - 1.0);
    } else {
      const double freq = std::numbers::pi * 0.5 * ((f + 1) / 2);
      time[f] = static_cast<T>(f % 2 == 1 ? std::sin(freq * t) : std::cos(freq * t));
    }
  }
  for (int y = 0; y < x.h(); ++y) {
    for (int xx = 0; xx < x.w(); ++xx) {
      T* dst = in.data() + (static_cast<std::size_t>(y) * x.w() + xx) * cin;
      int k = 0;
      for (int c = 0; c < x.d(); ++c) dst[k++] = static_cast<T>(x.at(y, xx, c));
      if (config_.coordinate_channels) {
        dst[k++] = static_cast<T>((y + 0.5) / x.h() * 2.0 - 1.0);
        dst[k++] = static_cast<T>((xx + 0.5) / x.w() * 2.0 - 1.0);
      }
      for (T v : time) dst[k++] = v;
      for (float c : cond) dst[k++] = static_cast<T>(c);
    }
  }
  return in;
}

template <typename T>
std::vector<T> ToyNet::forward(std::span<const T> params, const LatentGrid& x, double t,
                               std::span<const float> cond) const {
  std::vector<T> act = build_input<T>(x, t, cond);
  const std::size_t positions = static_cast<std::size_t>(x.positions());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    kernels::ConvShape shape{x.h(), x.w(), L.cin, L.cout, L.dilation};
    std::vector<T> z(positions * L.cout);
    kernels::conv3x3_forward<T>(shape, act,
                                params.subspan(L.weight_offset, 9 * static_cast<std::size_t>(L.cin) * L.cout),
                                params.subspan(L.bias_offset, L.cout), z);
    if (l + 1 < layers_.size()) {
      for (T& v : z) v = v * sigmoid(v);
    }
    act = std::move(z);
  }
  return act;
}

template <typename T>
double ToyNet::loss_and_grad(std::span<const T> params, const LatentGrid& x, double t,
                             std::span<const float> cond, const LatentGrid& target,
                             std::span<T> grad, double grad_scale) const {
  require_same_shape(x, target, "toy net loss");
  const std::size_t positions = static_cast<std::size_t>(x.positions());
  // Forward, keeping each layer's input and pre-activation.
  std::vector<std::vector<T>> inputs;
  std::vector<std::vector<T>> pre;
  inputs.push_back(build_input<T>(x, t, cond));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    kernels::ConvShape shape{x.h(), x.w(), L.cin, L.cout, L.dilation};
    std::vector<T> z(positions * L.cout);
    kernels::conv3x3_forward<T>(shape, inputs.back(),
                                params.subspan(L.weight_offset, 9 * static_cast<std::size_t>(L.cin) * L.cout),
                                params.subspan(L.bias_offset, L.cout), z);
    if (l + 1 < layers_.size()) {
      std::vector<T> a(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] * sigmoid(z[i]);
      pre.push_back(std::move(z));
      inputs.push_back(std::move(a));
    } else {
      pre.push_back(std::move(z));
    }
  }
  const std::vector<T>& out = pre.back();
  auto tv = target.data();
  const double n = static_cast<double>(out.size());
  double loss = 0.0;
  std::vector<T> g(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = static_cast<double>(out[i]) - tv[i];
    loss += r * r;
    g[i] = static_cast<T>(2.0 * r / n * grad_scale);
  }
  loss /= n;
  if (grad.empty()) return loss;

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& L = layers_[li];
    kernels::ConvShape shape{x.h(), x.w(), L.cin, L.cout, L.dilation};
    if (li + 1 < layers_.size()) {
      // Through SiLU: d/dz [z s(z)] = s(z) (1 + z (1 - s(z))).
      const auto& z = pre[li];
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T s = sigmoid(z[i]);
        g[i] *= s * (T(1) + z[i] * (T(1) - s));
      }
    }
    kernels::conv3x3_backward_params<T>(
        shape, inputs[li], g, grad.subspan(L.weight_offset, 9 * static_cast<std::size_t>(L.cin) * L.cout),
        grad.subspan(L.bias_offset, L.cout));
    if (li > 0) {
      std::vector<T> g_in(positions * L.cin);
      kernels::conv3x3_backward_input<T>(
          shape, g, params.subspan(L.weight_offset, 9 * static_cast<std::size_t>(L.cin) * L.cout), g_in);
      g = std::move(g_in);
    }
  }
  return loss;
}

template std::vector<float> ToyNet::forward<float>(std::span<const float>, const LatentGrid&, double,
                                                   std::span<const float>) const;
template std::vector<double> ToyNet::forward<double>(std::span<const double>, const LatentGrid&,
                                                     double, std::span<const float>) const;
template double ToyNet::loss_and_grad<float>(std::span<const float>, const LatentGrid&, double,
                                             std::span<const float>, const LatentGrid&,
                                             std::span<float>, double) const;
template double ToyNet::loss_and_grad<double>(std::span<const double>, const LatentGrid&, double,
                                              std::span<const float>, const LatentGrid&,
                                              std::span<double>, double) const;

void ToyNet::save(const std::filesystem::path& path, const nlohmann::ordered_json& training,
                  std::uint64_t seed) const {
  nlohmann::ordered_json header;
  header["format"] = "previewflow-checkpoint";
  header["version"] = 1;
  header["architecture"] = config_.to_json();
  header["condition_arity"] = config_.condition_arity;
  header["parameter_count"] = params_.size();
  header["training"] = training;
  header["seed"] = seed;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot open " + tmp.string());
    os << kMagic << header.dump() << "\n";
    io::write_f32_le(os, params_);
  }
  std::filesystem::rename(tmp, path);
}

ToyNet ToyNet::load(const std::filesystem::path& path, nlohmann::json* header_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::string magic;
  std::getline(is, magic);
  if (magic + "\n" != kMagic) throw IoError("not a checkpoint: " + path.string());
  std::string line;
  std::getline(is, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint header: " + std::string(e.what()));
  }
  ToyNetConfig config = ToyNetConfig::from_json(header.at("architecture"));
  const std::size_t count = header.at("parameter_count").get<std::size_t>();
  if (count != parameter_count(config)) throw IoError("checkpoint parameter count mismatch");
  auto params = io::read_f32_le(is, count);
  if (header_out) *header_out = header;
  return ToyNet(std::move(config), std::move(params));
}

ToyNetField::ToyNetField(std::shared_ptr<const ToyNet> net) : net_(std::move(net)) {
  if (!net_) throw ContractError("toy net field: null network");
}

void ToyNetField::evaluate(const LatentGrid& x, double t, std::span<const float> cond,
                           LatentGrid& out) const {
  auto v = net_->forward<float>(net_->params(), x, t, cond);
  std::copy(v.begin(), v.end(), out.data().begin());
}

}  // namespace pflow
