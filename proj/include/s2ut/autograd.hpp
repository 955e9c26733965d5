// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Parameters live outside
// the tape in a ParamStore; backward() adds their gradients into the store.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "s2ut/common.hpp"

namespace s2ut {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Parameter {
  Matrix value;
  // Mutable so a const model can still collect gradients on a tape.
  mutable Matrix grad;
};

/// Named parameters. std::map keeps iteration order (and therefore
/// serialisation and optimiser order) independent of insertion order.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Matrix value) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw ConfigError("duplicate parameter '" + name + "'");
    it->second.grad = Matrix::Zero(value.rows(), value.cols());
    it->second.value = std::move(value);
    return it->second;
  }

  Parameter& at(const std::string& name) {
    const auto it = params_.find(name);
    if (it == params_.end()) throw DataError("no parameter named '" + name + "'");
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    const auto it = params_.find(name);
    if (it == params_.end()) throw DataError("no parameter named '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.contains(name); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.grad.setZero();
  }

 private:
  std::map<std::string, Parameter> params_;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Tape {
 public:
  /// With grad disabled no backward closures are recorded (inference).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix value) { return push(std::move(value), nullptr); }

  Var param(const Parameter& p) {
    const auto it = leaves_.find(&p);
    if (it != leaves_.end()) return {this, it->second};
    Var v = push(p.value, nullptr);
    nodes_[static_cast<std::size_t>(v.id)].sink = &p.grad;
    leaves_.emplace(&p, v.id);
    return v;
  }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  Matrix& grad_mut(int id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Records a node. `backward` receives the node's output gradient.
  Var push(Matrix value, std::function<void(const Matrix&)> backward) {
    Node n;
    n.value = std::move(value);
    if (grad_enabled_) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Back-propagates from a 1x1 node and adds leaf gradients to their parameters.
  void backward(Var root, double seed = 1.0) {
    if (!grad_enabled_) throw TrainingError("backward on a tape recorded without gradients");
    if (root.value().size() != 1) throw TrainingError("backward root must be a scalar");
    grad_mut(root.id)(0, 0) += seed;
    for (int i = root.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(n.grad);
      if (n.sink) *n.sink += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // allocated lazily
    std::function<void(const Matrix&)> backward;
    Matrix* sink = nullptr;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> leaves_;
};

inline const Matrix& Var::value() const { return tape->value(id); }
inline const Matrix& Var::grad() const { return tape->grad(id); }

namespace ops {

inline void accumulate(Tape& t, int id, const Matrix& g) { t.grad_mut(id) += g; }

inline Var add(Var a, Var b) {
  Tape& t = *a.tape;
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DataError("add: shape mismatch");
  return t.push(a.value() + b.value(), [&t, a, b](const Matrix& g) {
    accumulate(t, a.id, g);
    accumulate(t, b.id, g);
  });
}

inline Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.push(a.value() * s, [&t, a, s](const Matrix& g) { accumulate(t, a.id, g * s); });
}

/// x (n x in) * W (in x out) + b (1 x out).
inline Var linear(Var x, Var w, Var b) {
  Tape& t = *x.tape;
  if (x.cols() != w.rows() || b.cols() != w.cols()) throw DataError("linear: shape mismatch");
  Matrix y = x.value() * w.value();
  y.rowwise() += b.value().row(0);
  return t.push(std::move(y), [&t, x, w, b](const Matrix& g) {
    accumulate(t, x.id, g * w.value().transpose());
    accumulate(t, w.id, x.value().transpose() * g);
    accumulate(t, b.id, g.colwise().sum());
  });
}

inline Var relu(Var x) {
  Tape& t = *x.tape;
  return t.push(x.value().cwiseMax(0.0), [&t, x](const Matrix& g) {
    accumulate(t, x.id, (x.value().array() > 0.0).select(g, 0.0));
  });
}

/// Per-row layer normalisation with gain and bias (1 x d each).
inline Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
  Tape& t = *x.tape;
  const Matrix& X = x.value();
  const auto d = static_cast<double>(X.cols());
  Matrix xhat(X.rows(), X.cols());
  Eigen::VectorXd inv_std(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double mu = X.row(i).mean();
    const double var = (X.row(i).array() - mu).square().sum() / d;
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (X.row(i).array() - mu) * inv_std(i);
  }
  Matrix y = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  return t.push(std::move(y), [&t, x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), d](const Matrix& g) {
    accumulate(t, gain.id, (g.array() * xhat.array()).colwise().sum().matrix());
    accumulate(t, bias.id, g.colwise().sum());
    const Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
    Matrix dx(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double m1 = dxhat.row(i).sum() / d;
      const double m2 = dxhat.row(i).dot(xhat.row(i)) / d;
      dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
    }
    accumulate(t, x.id, dx);
  });
}

/// Rows of `table` selected by `ids`.
inline Var embedding(Var table, std::span<const int> ids) {
  Tape& t = *table.tape;
  const Matrix& T = table.value();
  Matrix y(static_cast<Eigen::Index>(ids.size()), T.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= T.rows()) throw DataError("token id " + std::to_string(ids[i]) + " outside the vocabulary");
    y.row(static_cast<Eigen::Index>(i)) = T.row(ids[i]);
  }
  std::vector<int> copy(ids.begin(), ids.end());
  return t.push(std::move(y), [&t, table, copy = std::move(copy)](const Matrix& g) {
    Matrix& gt = t.grad_mut(table.id);
    for (std::size_t i = 0; i < copy.size(); ++i) gt.row(copy[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

/// Inverted dropout; identity when p == 0 or rng is null.
inline Var dropout(Var x, double p, Rng* rng) {
  if (p <= 0.0 || rng == nullptr) return x;
  Tape& t = *x.tape;
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->bernoulli(p) ? 0.0 : keep;
  Matrix y = x.value().cwiseProduct(mask);
  return t.push(std::move(y), [&t, x, mask = std::move(mask)](const Matrix& g) { accumulate(t, x.id, g.cwiseProduct(mask)); });
}

/// Scaled dot-product attention over already projected Q (n x d), K and
/// V (m x d), split into `heads` column blocks. With `causal`, query i only
/// sees keys 0..i.
inline Var attention(Var q, Var k, Var v, int heads, bool causal) {
  Tape& t = *q.tape;
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  const Eigen::Index n = Q.rows(), m = K.rows(), d = Q.cols();
  if (K.cols() != d || V.cols() != d || V.rows() != m || d % heads != 0) throw DataError("attention: shape mismatch");
  const Eigen::Index dh = d / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix out(n, d);
  for (int h = 0; h < heads; ++h) {
    Matrix S = (Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose()) * s;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index visible = causal ? std::min(m, i + 1) : m;
      const double mx = S.row(i).head(visible).maxCoeff();
      double z = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double e = j < visible ? std::exp(S(i, j) - mx) : 0.0;
        S(i, j) = e;
        z += e;
      }
      S.row(i) /= z;
    }
    out.middleCols(h * dh, dh) = S * V.middleCols(h * dh, dh);
    probs[static_cast<std::size_t>(h)] = std::move(S);
  }
  return t.push(std::move(out), [&t, q, k, v, heads, dh, s, probs = std::move(probs)](const Matrix& g) {
    const Matrix& Q = q.value();
    const Matrix& K = k.value();
    const Matrix& V = v.value();
    Matrix dq = Matrix::Zero(Q.rows(), Q.cols());
    Matrix dk = Matrix::Zero(K.rows(), K.cols());
    Matrix dv = Matrix::Zero(V.rows(), V.cols());
    for (int h = 0; h < heads; ++h) {
      const Matrix& A = probs[static_cast<std::size_t>(h)];
      const auto go = g.middleCols(h * dh, dh);
      dv.middleCols(h * dh, dh) = A.transpose() * go;
      const Matrix dA = go * V.middleCols(h * dh, dh).transpose();
      const Eigen::VectorXd row_dot = (dA.array() * A.array()).rowwise().sum();
      const Matrix dS = A.array() * (dA.array().colwise() - row_dot.array());
      dq.middleCols(h * dh, dh) = dS * K.middleCols(h * dh, dh) * s;
      dk.middleCols(h * dh, dh) = dS.transpose() * Q.middleCols(h * dh, dh) * s;
    }
    accumulate(t, q.id, dq);
    accumulate(t, k.id, dk);
    accumulate(t, v.id, dv);
  });
}

/// Row-wise log-softmax of a matrix (no tape).
inline Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

/// Mean token cross-entropy of `logits` (T x V) against `targets` (length T); 1x1.
inline Var cross_entropy(Var logits, std::span<const int> targets) {
  Tape& t = *logits.tape;
  const Matrix& L = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != L.rows() || targets.empty()) throw DataError("cross_entropy: length mismatch");
  Matrix logp = log_softmax_rows(L);
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= L.cols()) throw DataError("target id outside the vocabulary");
    loss -= logp(static_cast<Eigen::Index>(i), targets[i]);
  }
  const double n = static_cast<double>(targets.size());
  Matrix y(1, 1);
  y(0, 0) = loss / n;
  std::vector<int> copy(targets.begin(), targets.end());
  return t.push(std::move(y), [&t, logits, logp = std::move(logp), copy = std::move(copy), n](const Matrix& g) {
    Matrix d = logp.array().exp();
    for (std::size_t i = 0; i < copy.size(); ++i) d(static_cast<Eigen::Index>(i), copy[i]) -= 1.0;
    accumulate(t, logits.id, d * (g(0, 0) / n));
  });
}

}  // namespace ops
}  // namespace s2ut
