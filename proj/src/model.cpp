// Copyright 2026 The AMSR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "amsr/model.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "amsr/kv_config.hpp"
#include "amsr/ops.hpp"

namespace amsr {

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& domain, const std::string& got) {
    throw ConfigError("field '" + field + "': expected " + domain + ", got " + got);
  };
  if (scale < 2 || scale > 4) fail("scale", "2, 3 or 4", std::to_string(scale));
  if (channels < 4) fail("channels", "an integer >= 4", std::to_string(channels));
  if (n_amms < 1) fail("n_amms", "an integer >= 1", std::to_string(n_amms));
  if (n_am < 1) fail("n_am", "an integer >= 1", std::to_string(n_am));
  if (nl_reduction < 1 || channels % nl_reduction != 0) {
    fail("nl_reduction", "a divisor of channels (" + std::to_string(channels) + ")", std::to_string(nl_reduction));
  }
  if (so_reduction < 1 || channels / so_reduction < 1) {
    fail("so_reduction", "an integer in [1, channels]", std::to_string(so_reduction));
  }
  if (sf_layers < 1) fail("sf_layers", "an integer >= 1", std::to_string(sf_layers));
  if (!flags.nonlocal && !flags.second_order && !flags.multiscale) {
    fail("enable_nonlocal/enable_second_order/enable_multiscale", "at least one enabled", "all false");
  }
  for (double m : mean_rgb) {
    if (!(m >= 0.0 && m <= 255.0)) fail("mean_rgb", "three values in [0, 255]", std::to_string(m));
  }
}

std::string ModelConfig::canonical_text() const {
  char mean[128];
  std::snprintf(mean, sizeof mean, "%.17g,%.17g,%.17g", mean_rgb[0], mean_rgb[1], mean_rgb[2]);
  std::ostringstream out;
  out << "channels=" << channels << '\n'
      << "enable_multiscale=" << (flags.multiscale ? "true" : "false") << '\n'
      << "enable_nonlocal=" << (flags.nonlocal ? "true" : "false") << '\n'
      << "enable_second_order=" << (flags.second_order ? "true" : "false") << '\n'
      << "mean_rgb=" << mean << '\n'
      << "n_am=" << n_am << '\n'
      << "n_amms=" << n_amms << '\n'
      << "nl_reduction=" << nl_reduction << '\n'
      << "scale=" << scale << '\n'
      << "sf_layers=" << sf_layers << '\n'
      << "so_reduction=" << so_reduction << '\n';
  return out.str();
}

ModelConfig ModelConfig::from_canonical_text(const std::string& text) {
  const KvConfig kv = KvConfig::parse(text);
  kv.reject_unknown({"channels", "enable_multiscale", "enable_nonlocal", "enable_second_order", "mean_rgb",
                     "n_am", "n_amms", "nl_reduction", "scale", "sf_layers", "so_reduction"});
  ModelConfig c;
  c.scale = static_cast<int>(kv.get_int("scale", c.scale, 2, 4));
  c.channels = static_cast<int>(kv.get_int("channels", c.channels, 4, 4096));
  c.n_amms = static_cast<int>(kv.get_int("n_amms", c.n_amms, 1, 64));
  c.n_am = static_cast<int>(kv.get_int("n_am", c.n_am, 1, 64));
  c.nl_reduction = static_cast<int>(kv.get_int("nl_reduction", c.nl_reduction, 1, 4096));
  c.so_reduction = static_cast<int>(kv.get_int("so_reduction", std::min(16, c.channels), 1, 4096));
  c.sf_layers = static_cast<int>(kv.get_int("sf_layers", c.sf_layers, 1, 64));
  c.flags.nonlocal = kv.get_bool("enable_nonlocal", true);
  c.flags.second_order = kv.get_bool("enable_second_order", true);
  c.flags.multiscale = kv.get_bool("enable_multiscale", true);
  if (kv.has("mean_rgb")) {
    std::istringstream in(kv.get_string("mean_rgb", ""));
    std::string part;
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(in, part, ',')) throw ConfigError("field 'mean_rgb': expected three comma-separated values");
      KvConfig one;
      one.set("mean_rgb", part);
      c.mean_rgb[static_cast<std::size_t>(i)] = one.get_double("mean_rgb", 0.0, 0.0, 255.0);
    }
  }
  c.validate();
  return c;
}

ModelConfig ModelConfig::toy(int scale) {
  ModelConfig c;
  c.scale = scale;
  c.channels = 16;
  c.n_am = 2;
  c.n_amms = 1;
  c.so_reduction = 16;
  return c;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<LayerSpec> layer_specs(const ModelConfig& cfg) {
  cfg.validate();
  const int c = cfg.channels;
  const int cnl = c / cfg.nl_reduction;
  const int cso = c / cfg.so_reduction;
  const bool attention = cfg.flags.nonlocal || cfg.flags.second_order;
  std::vector<LayerSpec> specs;
  specs.push_back({"sf.head", c, 3, 3});
  for (int i = 0; i < cfg.sf_layers; ++i) specs.push_back({"sf.body." + std::to_string(i), c, c, 1});

  auto msff = [&](const std::string& p) {
    if (cfg.flags.multiscale) {
      specs.push_back({p + ".conv1", c, c, 1});
      specs.push_back({p + ".conv3", c, c, 3});
      specs.push_back({p + ".conv5", c, c, 5});
      specs.push_back({p + ".fuse", c, 3 * c, 1});
    } else {
      specs.push_back({p + ".conv3", c, c, 3});
      specs.push_back({p + ".fuse", c, c, 1});
    }
  };
  for (int g = 0; g < cfg.n_amms; ++g) {
    const std::string block = "amms." + std::to_string(g);
    msff(block + ".msff.0");
    if (attention) {
      for (int m = 0; m < cfg.n_am; ++m) {
        const std::string am = block + ".lsam.am." + std::to_string(m);
        int branches = 0;
        if (cfg.flags.nonlocal) {
          specs.push_back({am + ".nl.theta", cnl, c, 1});
          specs.push_back({am + ".nl.phi", cnl, c, 1});
          specs.push_back({am + ".nl.g", cnl, c, 1});
          specs.push_back({am + ".nl.out", c, cnl, 1});
          ++branches;
        }
        if (cfg.flags.second_order) {
          specs.push_back({am + ".so.down", cso, c, 1});
          specs.push_back({am + ".so.up", c, cso, 1});
          ++branches;
        }
        specs.push_back({am + ".fuse", c, branches * c, 1});
      }
    }
    msff(block + ".msff.1");
  }
  specs.push_back({"tail", 3 * cfg.scale * cfg.scale, c, 3});
  return specs;
}

// ---------------------------------------------------------------- params

template <typename T>
void ModelParams<T>::set(const std::string& path, std::vector<std::int64_t> dims, Tensor<T> value) {
  std::int64_t n = 1;
  for (auto d : dims) n *= d;
  if (n != value.numel()) throw ShapeError("parameter " + path + ": dims disagree with " + value.shape().str());
  map_[path] = Param<T>{std::move(dims), std::move(value)};
}

template <typename T>
void ModelParams<T>::replace(const std::string& path, Tensor<T> value) {
  auto it = map_.find(path);
  if (it == map_.end()) throw ContractError("no parameter named " + path);
  if (!(it->second.value.shape() == value.shape())) {
    throw ShapeError("parameter " + path + ": " + value.shape().str() + " does not match " +
                     it->second.value.shape().str());
  }
  it->second.value = std::move(value);
}

template <typename T>
const Param<T>& ModelParams<T>::param(const std::string& path) const {
  auto it = map_.find(path);
  if (it == map_.end()) throw ContractError("no parameter named " + path);
  return it->second;
}

template <typename T>
const Tensor<T>& ModelParams<T>::operator[](const std::string& path) const {
  return param(path).value;
}

template <typename T>
std::vector<std::string> ModelParams<T>::paths() const {
  std::vector<std::string> out;
  for (const auto& kv : map_) out.push_back(kv.first);
  return out;
}

template <typename T>
std::int64_t ModelParams<T>::count() const {
  std::int64_t total = 0;
  for (const auto& kv : map_) total += kv.second.value.numel();
  return total;
}

template <typename T>
ModelParams<T> ModelParams<T>::attach(Tape<T>& tape) const {
  ModelParams out;
  for (const auto& [path, p] : map_) out.map_[path] = Param<T>{p.dims, tape.leaf(p.value.detached())};
  return out;
}

template <typename T>
bool ModelParams<T>::operator==(const ModelParams& other) const {
  if (map_.size() != other.map_.size()) return false;
  for (const auto& [path, p] : map_) {
    auto it = other.map_.find(path);
    if (it == other.map_.end() || it->second.dims != p.dims) return false;
    auto a = p.value.values();
    auto b = it->second.value.values();
    if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) return false;
  }
  return true;
}

template <typename T>
ModelParams<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelParams<T> params;
  for (const LayerSpec& spec : layer_specs(config)) {
    const std::int64_t k2 = static_cast<std::int64_t>(spec.kernel) * spec.kernel;
    const double fan_in = static_cast<double>(spec.in_channels * k2);
    const double fan_out = static_cast<double>(spec.out_channels * k2);
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    const Shape ws{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
    std::vector<T> w(static_cast<std::size_t>(ws.numel()));
    for (T& v : w) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
      v = static_cast<T>((2.0 * u - 1.0) * a);
    }
    params.set(spec.path + ".w", {ws.n, ws.c, ws.h, ws.w}, Tensor<T>(ws, std::move(w)));
    params.set(spec.path + ".b", {spec.out_channels}, Tensor<T>(Shape{spec.out_channels, 1, 1, 1}));
  }
  return params;
}

// ---------------------------------------------------------------- forward

template <typename T>
Model<T>::Model(ModelConfig config, ModelParams<T> params) : config_(config), params_(std::move(params)) {
  config_.validate();
  for (const LayerSpec& spec : layer_specs(config_)) {
    for (const char* suffix : {".w", ".b"}) {
      if (!params_.contains(spec.path + suffix)) {
        throw ConfigError("parameters lack " + spec.path + suffix + " required by the configuration");
      }
    }
  }
}

template <typename T>
bool Model<T>::attention_disabled() const {
  return !config_.flags.nonlocal && !config_.flags.second_order;
}

template <typename T>
Tensor<T> Model<T>::conv(const Tensor<T>& x, const std::string& path) const {
  return ops::conv2d_same(x, params_[path + ".w"], params_[path + ".b"]);
}

template <typename T>
void Model<T>::require_channels(const Tensor<T>& x, const char* op) const {
  if (x.shape().c != config_.channels) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(config_.channels) +
                     " channels, got " + x.shape().str());
  }
}

template <typename T>
Tensor<T> Model<T>::forward_sf(const Tensor<T>& lr) const {
  if (lr.shape().c != 3) throw ShapeError("forward_sf: expected 3 input channels, got " + lr.shape().str());
  const Tensor<T> coarse = conv(lr, "sf.head");
  Tensor<T> body = coarse;
  for (int i = 0; i < config_.sf_layers; ++i) body = ops::relu(conv(body, "sf.body." + std::to_string(i)));
  return ops::add(body, coarse);
}

template <typename T>
Tensor<T> Model<T>::forward_msff(const Tensor<T>& x, const std::string& prefix) const {
  require_channels(x, "forward_msff");
  Tensor<T> fused;
  if (config_.flags.multiscale) {
    const std::vector<Tensor<T>> branches{ops::relu(conv(x, prefix + ".conv1")),
                                          ops::relu(conv(x, prefix + ".conv3")),
                                          ops::relu(conv(x, prefix + ".conv5"))};
    fused = conv(ops::concat_channels<T>(branches), prefix + ".fuse");
  } else {
    fused = conv(ops::relu(conv(x, prefix + ".conv3")), prefix + ".fuse");
  }
  return ops::add(fused, x);
}

template <typename T>
Tensor<T> Model<T>::forward_nonlocal(const Tensor<T>& x, const std::string& prefix) const {
  require_channels(x, "forward_nonlocal");
  const Shape s = x.shape();
  const std::int64_t hw = s.plane();
  const std::int64_t k = s.c / config_.nl_reduction;
  if (hw < 1) throw ShapeError("forward_nonlocal: empty feature map " + s.str());

  const Tensor<T> theta = conv(x, prefix + ".theta");
  const Tensor<T> phi = conv(x, prefix + ".phi");
  const Tensor<T> g = conv(x, prefix + ".g");
  const Tensor<T> theta_t = ops::transpose(ops::reshape(theta, Shape{s.n, 1, k, hw}));  // hw x k
  const Tensor<T> phi_m = ops::reshape(phi, Shape{s.n, 1, k, hw});                        // k x hw
  const Tensor<T> g_t = ops::transpose(ops::reshape(g, Shape{s.n, 1, k, hw}));          // hw x k

  Tensor<T> y;
  if (theta_t.tracked() || phi_m.tracked() || g_t.tracked()) {
    const Tensor<T> attn = ops::softmax_rows(ops::matmul(theta_t, phi_m));
    y = ops::matmul(attn, g_t);
  } else {
    y = ops::attention_blocked(theta_t, phi_m, g_t);
  }
  const Tensor<T> y_map = ops::reshape(ops::transpose(y), Shape{s.n, k, s.h, s.w});
  return ops::add(conv(y_map, prefix + ".out"), x);
}

template <typename T>
Tensor<T> Model<T>::forward_second_order(const Tensor<T>& x, const std::string& prefix) const {
  require_channels(x, "forward_second_order");
  const Shape s = x.shape();
  const Tensor<T> cov = ops::covariance_pool(x);
  const Tensor<T> root = ops::newton_schulz_sqrt(cov, 5);
  const Tensor<T> desc = ops::reshape(ops::row_mean(root), Shape{s.n, s.c, 1, 1});
  const Tensor<T> hidden = ops::relu(conv(desc, prefix + ".down"));
  const Tensor<T> gate = ops::sigmoid(conv(hidden, prefix + ".up"));
  return ops::mul(x, gate);
}

template <typename T>
Tensor<T> Model<T>::forward_am(const Tensor<T>& x, const std::string& prefix) const {
  require_channels(x, "forward_am");
  std::vector<Tensor<T>> branches;
  if (config_.flags.nonlocal) branches.push_back(forward_nonlocal(x, prefix + ".nl"));
  if (config_.flags.second_order) branches.push_back(forward_second_order(x, prefix + ".so"));
  if (branches.empty()) throw ConfigError("forward_am: both attention branches are disabled");
  const Tensor<T> merged = branches.size() == 1 ? branches[0] : ops::concat_channels<T>(branches);
  return ops::add(conv(merged, prefix + ".fuse"), x);
}

template <typename T>
Tensor<T> Model<T>::forward_ls_am(const Tensor<T>& x, const std::string& prefix) const {
  require_channels(x, "forward_ls_am");
  Tensor<T> h = x;
  for (int m = 0; m < config_.n_am; ++m) h = forward_am(h, prefix + ".am." + std::to_string(m));
  return ops::add(h, x);
}

template <typename T>
Tensor<T> Model<T>::forward_amms(const Tensor<T>& x, const std::string& prefix) const {
  require_channels(x, "forward_amms");
  Tensor<T> h = forward_msff(x, prefix + ".msff.0");
  if (!attention_disabled()) h = forward_ls_am(h, prefix + ".lsam");
  h = forward_msff(h, prefix + ".msff.1");
  return ops::add(h, x);
}

template <typename T>
Tensor<T> Model<T>::forward_deep(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (int g = 0; g < config_.n_amms; ++g) h = forward_amms(h, "amms." + std::to_string(g));
  return h;
}

template <typename T>
Tensor<T> Model<T>::forward_reconstruct(const Tensor<T>& features) const {
  require_channels(features, "forward_reconstruct");
  return ops::pixel_shuffle(conv(features, "tail"), config_.scale);
}

template <typename T>
Tensor<T> Model<T>::forward_full(const Tensor<T>& lr) const {
  return forward_reconstruct(forward_deep(forward_sf(lr)));
}

template class ModelParams<float>;
template class ModelParams<double>;
template class Model<float>;
template class Model<double>;
template ModelParams<float> build_model<float>(const ModelConfig&, std::uint64_t);
template ModelParams<double> build_model<double>(const ModelConfig&, std::uint64_t);

}  // namespace amsr
