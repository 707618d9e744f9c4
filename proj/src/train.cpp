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

#include "amsr/train.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>

#include "amsr/binary_io.hpp"
#include "amsr/checkpoint.hpp"
#include "amsr/errors.hpp"
#include "amsr/ops.hpp"

namespace amsr {

namespace {

constexpr char kStateMagic[4] = {'A', 'M', 'S', 'T'};
constexpr std::uint32_t kStateVersion = 1;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](const char* field, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("field '") + field + "': expected a positive number, got " + g17(v));
    }
  };
  positive("lr0", lr0);
  positive("eps", eps);
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("field 'beta1': expected 0 < beta1 < 1, got " + g17(beta1));
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("field 'beta2': expected 0 < beta2 < 1, got " + g17(beta2));
  positive("batch", batch);
  positive("iters_per_epoch", iters_per_epoch);
  positive("epochs", epochs);
  positive("lr_half_every", lr_half_every);
  positive("log_every", log_every);
  if (scale < 2 || scale > 4) throw ConfigError("field 'scale': expected 2, 3 or 4, got " + std::to_string(scale));
  if (patch < scale || patch % scale != 0) {
    throw ConfigError("field 'patch': expected a positive multiple of scale " + std::to_string(scale) + ", got " +
                      std::to_string(patch));
  }
  if (checkpoint_every < 0) {
    throw ConfigError("field 'checkpoint_every': expected >= 0, got " + std::to_string(checkpoint_every));
  }
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
  TrainConfig c;
  constexpr std::int64_t kBig = 1'000'000'000;
  c.lr0 = kv.get_double("lr0", c.lr0, 1e-12, 10.0);
  c.beta1 = kv.get_double("beta1", c.beta1, 1e-12, 1.0 - 1e-12);
  c.beta2 = kv.get_double("beta2", c.beta2, 1e-12, 1.0 - 1e-12);
  c.eps = kv.get_double("eps", c.eps, 1e-300, 1.0);
  c.batch = static_cast<int>(kv.get_int("batch", c.batch, 1, 4096));
  c.patch = static_cast<int>(kv.get_int("patch", c.patch, 2, 8192));
  c.iters_per_epoch = static_cast<int>(kv.get_int("iters_per_epoch", c.iters_per_epoch, 1, kBig));
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs, 1, kBig));
  c.lr_half_every = static_cast<int>(kv.get_int("lr_half_every", c.lr_half_every, 1, kBig));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed), 0, INT64_MAX));
  c.scale = static_cast<int>(kv.get_int("scale", c.scale, 2, 4));
  c.checkpoint_every = static_cast<int>(kv.get_int("checkpoint_every", c.checkpoint_every, 0, kBig));
  c.log_every = static_cast<int>(kv.get_int("log_every", c.log_every, 1, kBig));
  c.augment = kv.get_bool("augment", c.augment);
  c.validate();
  return c;
}

std::string TrainConfig::canonical_text() const {
  std::ostringstream out;
  out << "augment=" << (augment ? "true" : "false") << '\n'
      << "batch=" << batch << '\n'
      << "beta1=" << g17(beta1) << '\n'
      << "beta2=" << g17(beta2) << '\n'
      << "checkpoint_every=" << checkpoint_every << '\n'
      << "epochs=" << epochs << '\n'
      << "eps=" << g17(eps) << '\n'
      << "iters_per_epoch=" << iters_per_epoch << '\n'
      << "log_every=" << log_every << '\n'
      << "lr0=" << g17(lr0) << '\n'
      << "lr_half_every=" << lr_half_every << '\n'
      << "patch=" << patch << '\n'
      << "scale=" << scale << '\n'
      << "seed=" << seed << '\n';
  return out.str();
}

bool TrainConfig::full_scale() const {
  const double samples = static_cast<double>(epochs) * iters_per_epoch * batch;
  const double pixels = samples * patch * patch;
  return pixels > 1e11;
}

double lr_schedule(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw ContractError("lr_schedule: epoch must be >= 0, got " + std::to_string(epoch));
  return std::ldexp(config.lr0, -(epoch / config.lr_half_every));
}

OptimState OptimState::zeros(const ModelParams<float>& params) {
  OptimState s;
  for (const auto& [path, p] : params.entries()) {
    s.m[path].assign(static_cast<std::size_t>(p.value.numel()), 0.0f);
    s.v[path].assign(static_cast<std::size_t>(p.value.numel()), 0.0f);
  }
  return s;
}

void adam_step(ModelParams<float>& params, const GradMap& grads, OptimState& state, double lr,
               const TrainConfig& config) {
  state.t += 1;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (const auto& [path, p] : params.entries()) {
    auto git = grads.find(path);
    if (git == grads.end()) throw ContractError("adam_step: no gradient for " + path);
    const std::vector<float>& g = git->second;
    std::vector<float>& m = state.m.at(path);
    std::vector<float>& v = state.v.at(path);
    if (g.size() != m.size() || g.size() != static_cast<std::size_t>(p.value.numel())) {
      throw ContractError("adam_step: gradient for " + path + " has " + std::to_string(g.size()) + " values, expected " +
                          std::to_string(p.value.numel()));
    }
    std::vector<float> theta = p.value.to_vector();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i];
      m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * gi);
      v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * gi * gi);
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      theta[i] = static_cast<float>(theta[i] - lr * mh / (std::sqrt(vh) + config.eps));
    }
    params.replace(path, Tensor<float>(p.value.shape(), std::move(theta)));
  }
}

std::string format_loss_line(const LossRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g", r.epoch, r.iter, r.lr, r.loss);
  return buf;
}

StepResult loss_and_grads(const ModelConfig& model_config, const ModelParams<float>& params, const Batch& batch) {
  Tape<float> tape;
  const ModelParams<float> leaves = params.attach(tape);
  const Model<float> model(model_config, leaves);
  const Tensor<float> loss = ops::l1_loss(model.forward_full(batch.lr), batch.hr);
  const Gradients<float> g = tape.backward(loss);
  StepResult out;
  out.loss = loss[0];
  for (const auto& [path, p] : leaves.entries()) out.grads[path] = g.wrt(p.value);
  return out;
}

void save_train_state(const std::filesystem::path& path, const TrainState& state) {
  ByteWriter w;
  w.raw(kStateMagic, 4);
  w.u32(kStateVersion);
  w.u64(static_cast<std::uint64_t>(state.opt.t));
  w.u32(static_cast<std::uint32_t>(state.next_epoch));
  w.f64(state.best_loss);
  w.u32(static_cast<std::uint32_t>(state.opt.m.size()));
  for (const auto& [name, m] : state.opt.m) {
    const std::vector<float>& v = state.opt.v.at(name);
    w.str(name);
    w.u64(m.size());
    for (float x : m) w.f32(x);
    for (float x : v) w.f32(x);
  }
  w.write_file(path);
}

void load_train_state(const std::filesystem::path& path, TrainState& state) {
  ByteReader r(ByteReader::read_file(path), path.string());
  char magic[4];
  r.raw(magic, 4);
  if (std::string(magic, 4) != std::string(kStateMagic, 4)) throw FormatError(path.string() + ": not a training-state file");
  const std::uint32_t version = r.u32();
  if (version != kStateVersion) {
    throw FormatError(path.string() + ": unsupported training-state version " + std::to_string(version));
  }
  OptimState opt;
  opt.t = static_cast<std::int64_t>(r.u64());
  const int next_epoch = static_cast<int>(r.u32());
  const double best = r.f64();
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str();
    const std::uint64_t n = r.u64();
    if (!state.params.contains(name) || static_cast<std::uint64_t>(state.params[name].numel()) != n) {
      throw IntegrityError(path.string() + ": optimizer state for " + name + " does not match the checkpoint");
    }
    auto& m = opt.m[name];
    auto& v = opt.v[name];
    m.resize(n);
    v.resize(n);
    for (auto& x : m) x = r.f32();
    for (auto& x : v) x = r.f32();
  }
  if (opt.m.size() != state.params.size()) {
    throw IntegrityError(path.string() + ": optimizer state covers " + std::to_string(opt.m.size()) + " of " +
                         std::to_string(state.params.size()) + " parameters");
  }
  if (r.remaining() != 0) throw IntegrityError(path.string() + ": trailing bytes");
  state.opt = std::move(opt);
  state.next_epoch = next_epoch;
  state.best_loss = best;
}

FitResult fit(const ModelConfig& model_config, TrainState state, const BatchSampler& sampler,
              const TrainConfig& config, const TrainHooks& hooks, const FitOptions& options) {
  config.validate();
  model_config.validate();
  if (config.scale != model_config.scale) {
    throw ConfigError("field 'scale': training scale " + std::to_string(config.scale) + " differs from model scale " +
                      std::to_string(model_config.scale));
  }
  if (state.opt.m.empty()) state.opt = OptimState::zeros(state.params);

  std::ofstream csv;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    csv.open(*options.out_dir / "loss.csv", std::ios::app);
    if (!csv) throw IoError("cannot open " + (*options.out_dir / "loss.csv").string());
  }
  auto save_pair = [&](const std::string& stem) {
    save_checkpoint(*options.out_dir / (stem + ".amsr"), model_config, state.params);
    save_train_state(*options.out_dir / (stem + ".state"), state);
  };

  FitResult result;
  std::deque<double> tail;
  for (int epoch = state.next_epoch; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(config, epoch);
    double epoch_total = 0.0;
    int epoch_steps = 0;
    bool stopped = false;
    for (int it = 1; it <= config.iters_per_epoch; ++it) {
      const Batch batch = sampler.batch(epoch, it - 1, config.batch);
      StepResult step = loss_and_grads(model_config, state.params, batch);
      tail.push_back(step.loss);
      if (tail.size() > 10) tail.pop_front();
      if (!std::isfinite(step.loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", iter " << it << " (step " << state.opt.t + 1
            << ", lr " << g17(lr) << "); recent losses:";
        for (double l : tail) msg << ' ' << g17(l);
        throw NumericError(msg.str());
      }
      adam_step(state.params, step.grads, state.opt, lr, config);
      result.step_losses.push_back(step.loss);
      epoch_total += step.loss;
      ++epoch_steps;
      if (hooks.on_step) hooks.on_step(state.opt.t, step.loss);

      const bool last = it == config.iters_per_epoch;
      stopped = options.max_steps > 0 && state.opt.t >= options.max_steps;
      if (it == 1 || it % config.log_every == 0 || last || stopped) {
        const LossRecord rec{epoch, it, lr, step.loss};
        result.log.push_back(rec);
        if (csv.is_open()) csv << format_loss_line(rec) << '\n' << std::flush;
        if (hooks.on_log) hooks.on_log(rec);
      }
      if (stopped) break;
    }
    if (stopped) break;

    state.next_epoch = epoch + 1;
    const double mean_loss = epoch_total / epoch_steps;
    const bool best = mean_loss < state.best_loss;
    if (best) state.best_loss = mean_loss;
    if (options.out_dir) {
      if (config.checkpoint_every > 0 && state.next_epoch % config.checkpoint_every == 0) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "epoch_%04d", state.next_epoch);
        save_pair(stem);
      }
      if (best) save_pair("best");
      save_pair("last");
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, mean_loss, state);
  }
  result.state = std::move(state);
  return result;
}

}  // namespace amsr
