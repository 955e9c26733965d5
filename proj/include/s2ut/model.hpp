// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// Speech-to-unit translation model: one shared Transformer encoder over source
// frames and B independent autoregressive decoder branches.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2ut/autograd.hpp"
#include "s2ut/common.hpp"
#include "s2ut/targetprep.hpp"

namespace s2ut {

struct ModelConfig {
  int input_dim = 16;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int hidden_dim = 64;
  int ffn_dim = 128;
  int attention_heads = 2;
  int unit_vocab = 12 + tokens::kSpecialCount;
  int branch_count = 1;
  double dropout = 0.1;
  // Targets start with a Y/N quality token (multi-task training).
  bool quality_token = false;

  int unit_count() const { return unit_vocab - tokens::kSpecialCount; }

  void validate() const {
    if (input_dim < 1 || hidden_dim < 1 || ffn_dim < 1 || attention_heads < 1)
      throw ConfigError("model dimensions must be >= 1");
    if (encoder_layers < 0 || decoder_layers < 0) throw ConfigError("layer counts must be >= 0");
    if (branch_count < 1) throw ConfigError("branch_count must be >= 1");
    if (hidden_dim % attention_heads != 0) throw ConfigError("hidden_dim must be divisible by attention_heads");
    if (unit_vocab < tokens::kSpecialCount + 1) throw ConfigError("unit_vocab must cover the specials and at least one unit");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"input_dim", c.input_dim},           {"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers},
       {"hidden_dim", c.hidden_dim},         {"ffn_dim", c.ffn_dim},               {"attention_heads", c.attention_heads},
       {"unit_vocab", c.unit_vocab},         {"branch_count", c.branch_count},     {"dropout", c.dropout},
       {"quality_token", c.quality_token}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.input_dim = j.value("input_dim", c.input_dim);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.unit_vocab = j.value("unit_vocab", c.unit_vocab);
  c.branch_count = j.value("branch_count", c.branch_count);
  c.dropout = j.value("dropout", c.dropout);
  c.quality_token = j.value("quality_token", c.quality_token);
}

/// Sinusoidal position table, rows = positions.
inline Matrix positional_encoding(Eigen::Index length, Eigen::Index dim) {
  Matrix pe(length, dim);
  for (Eigen::Index pos = 0; pos < length; ++pos) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(pos, i) = i % 2 == 0 ? std::sin(static_cast<double>(pos) * rate) : std::cos(static_cast<double>(pos) * rate);
    }
  }
  return pe;
}

class S2utModel {
 public:
  S2utModel() = default;

  S2utModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.hidden_dim;
    add_linear("encoder.input", cfg_.input_dim, d, seed);
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
      const std::string p = "encoder.layer" + std::to_string(l);
      add_norm(p + ".attn_norm", d);
      add_attention(p + ".self_attn", seed);
      add_norm(p + ".ffn_norm", d);
      add_linear(p + ".ffn1", d, cfg_.ffn_dim, seed);
      add_linear(p + ".ffn2", cfg_.ffn_dim, d, seed);
    }
    add_norm("encoder.final_norm", d);
    for (int b = 0; b < cfg_.branch_count; ++b) {
      const std::string p = branch_prefix(b);
      add_matrix(p + "embedding", cfg_.unit_vocab, d, seed, d);
      for (int l = 0; l < cfg_.decoder_layers; ++l) {
        const std::string q = p + "layer" + std::to_string(l);
        add_norm(q + ".self_norm", d);
        add_attention(q + ".self_attn", seed);
        add_norm(q + ".cross_norm", d);
        add_attention(q + ".cross_attn", seed);
        add_norm(q + ".ffn_norm", d);
        add_linear(q + ".ffn1", d, cfg_.ffn_dim, seed);
        add_linear(q + ".ffn2", cfg_.ffn_dim, d, seed);
      }
      add_norm(p + "final_norm", d);
      add_linear(p + "output", d, cfg_.unit_vocab, seed);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  static std::string branch_prefix(int b) { return "branch" + std::to_string(b) + ".decoder."; }

  /// Encoder states (frames x hidden). Pass an rng to enable dropout.
  Var encode(Tape& t, const Matrix& source, Rng* rng = nullptr) const {
    if (source.cols() != cfg_.input_dim)
      throw DataError("source dimension " + std::to_string(source.cols()) + " does not match the model input " +
                      std::to_string(cfg_.input_dim));
    if (source.rows() == 0) throw DataError("empty source");
    Var x = linear(t, "encoder.input", t.constant(source));
    x = ops::add(x, t.constant(positional_encoding(source.rows(), cfg_.hidden_dim)));
    x = ops::dropout(x, cfg_.dropout, rng);
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
      const std::string p = "encoder.layer" + std::to_string(l);
      Var h = norm(t, p + ".attn_norm", x);
      x = ops::add(x, ops::dropout(attend(t, p + ".self_attn", h, h, false), cfg_.dropout, rng));
      h = norm(t, p + ".ffn_norm", x);
      x = ops::add(x, ops::dropout(feed_forward(t, p, h, rng), cfg_.dropout, rng));
    }
    return norm(t, "encoder.final_norm", x);
  }

  /// Teacher-forced logits (prefix length x vocab) of one branch.
  Var decode(Tape& t, Var memory, int branch, std::span<const int> prefix, Rng* rng = nullptr) const {
    if (branch < 0 || branch >= cfg_.branch_count) throw DataError("branch " + std::to_string(branch) + " out of range");
    if (prefix.empty()) throw DataError("decoder prefix must start with BOS");
    const std::string p = branch_prefix(branch);
    Var x = ops::embedding(t.param(params_.at(p + "embedding")), prefix);
    x = ops::add(x, t.constant(positional_encoding(static_cast<Eigen::Index>(prefix.size()), cfg_.hidden_dim)));
    x = ops::dropout(x, cfg_.dropout, rng);
    for (int l = 0; l < cfg_.decoder_layers; ++l) {
      const std::string q = p + "layer" + std::to_string(l);
      Var h = norm(t, q + ".self_norm", x);
      x = ops::add(x, ops::dropout(attend(t, q + ".self_attn", h, h, true), cfg_.dropout, rng));
      h = norm(t, q + ".cross_norm", x);
      x = ops::add(x, ops::dropout(attend(t, q + ".cross_attn", h, memory, false), cfg_.dropout, rng));
      h = norm(t, q + ".ffn_norm", x);
      x = ops::add(x, ops::dropout(feed_forward(t, q, h, rng), cfg_.dropout, rng));
    }
    x = norm(t, p + "final_norm", x);
    return linear(t, p + "output", x);
  }

  /// Per-branch teacher-forced logits with the encoder run once.
  std::vector<Matrix> forward(const Matrix& source, const std::vector<std::vector<int>>& prefixes) const {
    Tape t(false);
    Var memory = encode(t, source);
    std::vector<Matrix> out;
    for (std::size_t b = 0; b < prefixes.size(); ++b) out.push_back(decode(t, memory, static_cast<int>(b), prefixes[b]).value());
    return out;
  }

  /// Sum over branches of the mean token cross-entropy. `targets[b]` holds the
  /// stream without BOS/EOS; the decoder input is BOS + stream and the
  /// prediction target is stream + EOS.
  Var loss(Tape& t, const Matrix& source, const std::vector<std::vector<int>>& targets, Rng* rng = nullptr) const {
    if (static_cast<int>(targets.size()) != cfg_.branch_count)
      throw DataError("expected " + std::to_string(cfg_.branch_count) + " target streams, got " + std::to_string(targets.size()));
    Var memory = encode(t, source, rng);
    Var total{};
    for (int b = 0; b < cfg_.branch_count; ++b) {
      const auto& stream = targets[static_cast<std::size_t>(b)];
      std::vector<int> input{tokens::kBos};
      input.insert(input.end(), stream.begin(), stream.end());
      std::vector<int> output(stream.begin(), stream.end());
      output.push_back(tokens::kEos);
      for (int tok : output)
        if (tok < 0 || tok >= cfg_.unit_vocab) throw DataError("target token " + std::to_string(tok) + " overflows the vocabulary");
      Var ce = ops::cross_entropy(decode(t, memory, b, input, rng), output);
      total = b == 0 ? ce : ops::add(total, ce);
    }
    return total;
  }

 private:
  Var linear(Tape& t, const std::string& name, Var x) const {
    return ops::linear(x, t.param(params_.at(name + ".weight")), t.param(params_.at(name + ".bias")));
  }
  Var norm(Tape& t, const std::string& name, Var x) const {
    return ops::layer_norm(x, t.param(params_.at(name + ".gain")), t.param(params_.at(name + ".bias")));
  }
  Var attend(Tape& t, const std::string& name, Var query, Var memory, bool causal) const {
    Var q = linear(t, name + ".query", query);
    Var k = linear(t, name + ".key", memory);
    Var v = linear(t, name + ".value", memory);
    return linear(t, name + ".out", ops::attention(q, k, v, cfg_.attention_heads, causal));
  }
  Var feed_forward(Tape& t, const std::string& prefix, Var x, Rng* rng) const {
    Var h = ops::dropout(ops::relu(linear(t, prefix + ".ffn1", x)), cfg_.dropout, rng);
    return linear(t, prefix + ".ffn2", h);
  }

  // Xavier-uniform weights; each tensor draws from its own named stream so
  // adding a branch leaves every other tensor unchanged.
  void add_matrix(const std::string& name, int rows, int cols, std::uint64_t seed, int fan_out) {
    Rng rng(derive_seed(seed, "init", name));
    const double a = std::sqrt(6.0 / static_cast<double>(rows + fan_out));
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.uniform() - 1.0) * a;
    params_.add(name, std::move(w));
  }
  void add_linear(const std::string& name, int in, int out, std::uint64_t seed) {
    add_matrix(name + ".weight", in, out, seed, out);
    params_.add(name + ".bias", Matrix::Zero(1, out));
  }
  void add_norm(const std::string& name, int d) {
    params_.add(name + ".gain", Matrix::Ones(1, d));
    params_.add(name + ".bias", Matrix::Zero(1, d));
  }
  void add_attention(const std::string& name, std::uint64_t seed) {
    for (const char* part : {".query", ".key", ".value", ".out"}) add_linear(name + part, cfg_.hidden_dim, cfg_.hidden_dim, seed);
  }

  ModelConfig cfg_;
  ParamStore params_;
};

inline S2utModel init_model(const ModelConfig& cfg, std::uint64_t seed) { return S2utModel(cfg, seed); }

}  // namespace s2ut
