// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// AdamW training loop, learning-rate schedule and checkpoint files.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2ut/autograd.hpp"
#include "s2ut/common.hpp"
#include "s2ut/model.hpp"
#include "s2ut/targetprep.hpp"

namespace s2ut {

struct TrainConfig {
  double learning_rate = 5e-4;
  int warmup_steps = 500;
  double warmup_start_lr = 1e-7;
  int grad_accum = 4;
  int max_steps = 5000;
  int batch_size = 8;
  std::uint64_t seed = 1;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables clipping
  int eval_every = 250;    // dev-loss evaluation period in optimiser steps

  void validate() const {
    if (learning_rate < 0 || warmup_start_lr < 0) throw ConfigError("learning rates must be non-negative");
    if (warmup_steps < 1 || grad_accum < 1 || max_steps < 1 || batch_size < 1 || eval_every < 1)
      throw ConfigError("step counts and sizes must be >= 1");
    if (warmup_steps > max_steps) throw ConfigError("warmup_steps must not exceed max_steps");
    if (weight_decay < 0 || clip_norm < 0) throw ConfigError("weight_decay and clip_norm must be non-negative");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1) || adam_eps <= 0) throw ConfigError("invalid Adam constants");
  }

  bool operator==(const TrainConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"warmup_steps", c.warmup_steps}, {"warmup_start_lr", c.warmup_start_lr},
       {"grad_accum", c.grad_accum},       {"max_steps", c.max_steps},       {"batch_size", c.batch_size},
       {"seed", c.seed},                   {"weight_decay", c.weight_decay}, {"beta1", c.beta1},
       {"beta2", c.beta2},                 {"adam_eps", c.adam_eps},         {"clip_norm", c.clip_norm},
       {"eval_every", c.eval_every}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.warmup_start_lr = j.value("warmup_start_lr", c.warmup_start_lr);
  c.grad_accum = j.value("grad_accum", c.grad_accum);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.eval_every = j.value("eval_every", c.eval_every);
}

/// Linear warmup from warmup_start_lr to learning_rate, then inverse-square-root decay.
inline double learning_rate_at(const TrainConfig& c, int step) {
  if (step <= c.warmup_steps)
    return c.warmup_start_lr + (c.learning_rate - c.warmup_start_lr) * static_cast<double>(step) / static_cast<double>(c.warmup_steps);
  return c.learning_rate * std::sqrt(static_cast<double>(c.warmup_steps) / static_cast<double>(step));
}

/// Decoupled weight decay applies to weight matrices and embeddings only.
inline bool decays(const std::string& name) {
  return name.ends_with(".weight") || name.ends_with("embedding");
}

class AdamW {
 public:
  explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}

  void step(ParamStore& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (auto& [name, p] : params) {
      auto [it, fresh] = moments_.try_emplace(name);
      if (fresh) {
        it->second.first = Matrix::Zero(p.value.rows(), p.value.cols());
        it->second.second = Matrix::Zero(p.value.rows(), p.value.cols());
      }
      Matrix& m = it->second.first;
      Matrix& v = it->second.second;
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
      if (decays(name)) p.value *= 1.0 - lr * cfg_.weight_decay;
      p.value.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.adam_eps);
    }
  }

 private:
  TrainConfig cfg_;
  long t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

struct Checkpoint {
  S2utModel model;
  long step = 0;
  double dev_loss = std::numeric_limits<double>::quiet_NaN();
  std::string rng_state;
};

/// Mean per-example loss (summed over branches) without dropout.
inline double dataset_loss(const S2utModel& model, const TrainingSet& set) {
  if (set.examples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& ex : set.examples) {
    Tape t(false);
    total += model.loss(t, ex.source->frames, ex.targets).value()(0, 0);
  }
  return total / static_cast<double>(set.examples.size());
}

struct TrainHooks {
  std::ostream* log = nullptr;   // JSONL step records
  const TrainingSet* dev = nullptr;  // enables best-dev checkpointing
};

/// Trains `model` in place and returns the checkpoint with the lowest dev
/// loss (or the final weights when no dev set is given).
///
/// One step is one optimiser update over batch_size * grad_accum examples
/// drawn from a seeded stream of epoch permutations. The step loss is the
/// mean per-example loss, so accumulation does not change the update.
inline Checkpoint train(S2utModel model, const TrainingSet& data, const TrainConfig& tc, const TrainHooks& hooks = {}) {
  tc.validate();
  if (data.examples.empty()) throw DataError("training set is empty");
  if (data.branch_count() != model.config().branch_count)
    throw ConfigError("dataset has " + std::to_string(data.branch_count()) + " target streams but the model has " +
                      std::to_string(model.config().branch_count) + " branches");

  Rng order_rng(derive_seed(tc.seed, "order"));
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  auto next_example = [&]() -> const TrainingExample& {
    if (cursor == order.size()) {
      order.resize(data.examples.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      shuffle(order, order_rng);
      cursor = 0;
    }
    return data.examples[order[cursor++]];
  };

  AdamW opt(tc);
  Checkpoint best;
  best.model = model;
  double best_dev = std::numeric_limits<double>::infinity();
  const double inv = 1.0 / static_cast<double>(tc.batch_size * tc.grad_accum);

  auto evaluate_dev = [&](int step) {
    if (!hooks.dev || hooks.dev->examples.empty()) return;
    const double dev = dataset_loss(model, *hooks.dev);
    if (hooks.log) *hooks.log << nlohmann::json{{"step", step}, {"dev_loss", dev}}.dump() << '\n';
    if (dev < best_dev) {
      best_dev = dev;
      best.model = model;
      best.step = step;
      best.dev_loss = dev;
      best.rng_state = order_rng.state();
    }
  };

  for (int step = 1; step <= tc.max_steps; ++step) {
    model.params().zero_grad();
    double step_loss = 0.0;
    int ordinal = 0;
    for (int a = 0; a < tc.grad_accum; ++a) {
      Tape t;
      Var total{};
      for (int b = 0; b < tc.batch_size; ++b, ++ordinal) {
        const auto& ex = next_example();
        Rng drop(derive_seed(tc.seed, "dropout", step, ordinal));
        Var l = ops::scale(model.loss(t, ex.source->frames, ex.targets, &drop), inv);
        total = b == 0 ? l : ops::add(total, l);
      }
      const double v = total.value()(0, 0);
      if (!std::isfinite(v))
        throw TrainingError("non-finite loss at step " + std::to_string(step) + " (micro-batch " + std::to_string(a) +
                            "); try a lower learning_rate");
      step_loss += v;
      t.backward(total);
    }

    if (tc.clip_norm > 0) {
      double sq = 0.0;
      for (const auto& [name, p] : model.params()) sq += p.grad.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > tc.clip_norm)
        for (auto& [name, p] : model.params()) p.grad *= tc.clip_norm / norm;
    }
    const double lr = learning_rate_at(tc, step);
    opt.step(model.params(), lr);
    if (hooks.log) *hooks.log << nlohmann::json{{"step", step}, {"loss", step_loss}, {"lr", lr}}.dump() << '\n';
    if (step % tc.eval_every == 0 || step == tc.max_steps) evaluate_dev(step);
  }

  if (!hooks.dev || hooks.dev->examples.empty()) {
    best.model = std::move(model);
    best.step = tc.max_steps;
    best.rng_state = order_rng.state();
  }
  for (auto& [name, p] : best.model.params()) p.grad.setZero();
  return best;
}

// Checkpoint container: magic, version, JSON header length, JSON header, then
// the raw doubles of every tensor in header order.
inline constexpr char kCheckpointMagic[8] = {'S', '2', 'U', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  nlohmann::json header;
  header["config"] = ck.model.config();
  header["step"] = ck.step;
  header["dev_loss"] = std::isfinite(ck.dev_loss) ? nlohmann::json(ck.dev_loss) : nlohmann::json(nullptr);
  header["rng_state"] = ck.rng_state;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, p] : ck.model.params()) tensors.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  header["tensors"] = tensors;
  const std::string h = header.dump();
  const std::uint64_t len = h.size();
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  os.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, p] : ck.model.params())
    os.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)));
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw DataError("not a checkpoint file");
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!is || version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is || len > (1u << 26)) throw DataError("corrupt checkpoint header");
  std::string h(len, '\0');
  is.read(h.data(), static_cast<std::streamsize>(len));
  if (!is) throw DataError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  Checkpoint ck;
  ck.model = S2utModel(header.at("config").get<ModelConfig>(), 0);
  ck.step = header.at("step").get<long>();
  ck.dev_loss = header.at("dev_loss").is_null() ? std::numeric_limits<double>::quiet_NaN() : header.at("dev_loss").get<double>();
  ck.rng_state = header.at("rng_state").get<std::string>();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != ck.model.params().size()) throw DataError("checkpoint tensor list does not match its config");
  for (const auto& t : tensors) {
    auto& p = ck.model.params().at(t.at("name").get<std::string>());
    if (p.value.rows() != t.at("rows").get<Eigen::Index>() || p.value.cols() != t.at("cols").get<Eigen::Index>())
      throw DataError("tensor " + t.at("name").get<std::string>() + " has the wrong shape");
    if (!is.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double))))
      throw DataError("truncated checkpoint weights");
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  write_checkpoint(os, ck);
  if (!os) throw DataError("failed writing " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace s2ut
