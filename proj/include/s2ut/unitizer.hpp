// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "s2ut/common.hpp"
#include "s2ut/synthworld.hpp"

namespace s2ut {

struct Codebook {
  FrameMatrix centroids;  // k x D
  std::uint64_t fit_seed = 0;
  double inertia = 0.0;
  // Inertia measured after every assignment step, in order.
  std::vector<double> inertia_history;

  int k() const { return static_cast<int>(centroids.rows()); }
  int dim() const { return static_cast<int>(centroids.cols()); }
};

struct UnitSequence {
  std::vector<int> units;
  std::string utt_id;
  std::string system_id;
};

struct ReducedUnits {
  std::vector<int> units;
  std::vector<int> durations;

  bool operator==(const ReducedUnits&) const = default;
};

namespace detail {

inline double squared_distance(const FrameMatrix& a, Eigen::Index i, const FrameMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Index of the nearest centroid; ties go to the lowest index.
inline int nearest_centroid(const FrameMatrix& points, Eigen::Index i, const FrameMatrix& centroids, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(points, i, centroids, c);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline Eigen::Index count_distinct_rows(const FrameMatrix& points) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index d = 0; d < points.cols(); ++d) {
      if (points(a, d) != points(b, d)) return points(a, d) < points(b, d);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  Eigen::Index distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i)
    if (less(order[i - 1], order[i])) ++distinct;
  return distinct;
}

/// One Lloyd run from a k-means++ seeding drawn with `rng`.
inline Codebook lloyd_run(const FrameMatrix& points, int k, Rng& rng, int max_iters, double tol) {
  const Eigen::Index n = points.rows();
  Codebook cb;
  cb.centroids.resize(k, points.cols());

  // k-means++ seeding.
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Eigen::Index first = rng.uniform_int(0, n - 1);
  cb.centroids.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], detail::squared_distance(points, i, cb.centroids, c - 1));
      total += d2[static_cast<std::size_t>(i)];
    }
    double target = rng.uniform() * total;
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      target -= d2[static_cast<std::size_t>(i)];
      if (target < 0 && d2[static_cast<std::size_t>(i)] > 0) {
        pick = i;
        break;
      }
    }
    // Guard against the rounding tail landing on an already-chosen point.
    while (d2[static_cast<std::size_t>(pick)] == 0 && pick > 0) --pick;
    cb.centroids.row(c) = points.row(pick);
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < std::max(1, max_iters); ++iter) {
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      assign[static_cast<std::size_t>(i)] = detail::nearest_centroid(points, i, cb.centroids, &dist[static_cast<std::size_t>(i)]);
      inertia += dist[static_cast<std::size_t>(i)];
    }
    cb.inertia_history.push_back(inertia);
    cb.inertia = inertia;
    if (previous - inertia < tol || iter + 1 >= max_iters) break;
    previous = inertia;

    FrameMatrix sums = FrameMatrix::Zero(k, points.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        cb.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: move it onto the farthest point.
      const auto far = std::max_element(dist.begin(), dist.end()) - dist.begin();
      cb.centroids.row(c) = points.row(far);
      dist[static_cast<std::size_t>(far)] = 0.0;
    }
  }
  return cb;
}

}  // namespace detail

/// Lloyd's algorithm with seeded k-means++ initialisation, keeping the lowest
/// inertia of `n_init` independently seeded runs (first run wins ties).
///
/// Each run stops after `max_iters` iterations or once the inertia improvement
/// drops below `tol`. A cluster that ends up empty is re-seeded at the point
/// farthest from its assigned centroid, which keeps the inertia sequence
/// non-increasing.
inline Codebook fit_kmeans(const FrameMatrix& points, int k, std::uint64_t seed, int max_iters = 100, double tol = 1e-6,
                           int n_init = 10) {
  if (k < 1) throw FitError("k must be >= 1");
  if (tol < 0) throw FitError("tol must be non-negative");
  if (n_init < 1) throw FitError("n_init must be >= 1");
  if (detail::count_distinct_rows(points) < k)
    throw FitError("need at least k=" + std::to_string(k) + " distinct frames");
  Codebook best;
  for (int run = 0; run < n_init; ++run) {
    Rng rng(derive_seed(seed, "kmeans-init", run));
    Codebook cb = detail::lloyd_run(points, k, rng, max_iters, tol);
    if (run == 0 || cb.inertia < best.inertia) best = std::move(cb);
  }
  best.fit_seed = seed;
  return best;
}

inline UnitSequence encode_units(const FeatureSequence& fs, const Codebook& cb) {
  if (fs.dim() != cb.dim())
    throw DataError("frame dimension " + std::to_string(fs.dim()) + " does not match codebook dimension " + std::to_string(cb.dim()));
  UnitSequence out;
  out.utt_id = fs.utt_id;
  out.system_id = fs.system_id;
  out.units.reserve(static_cast<std::size_t>(fs.frame_count()));
  for (Eigen::Index i = 0; i < fs.frames.rows(); ++i) out.units.push_back(detail::nearest_centroid(fs.frames, i, cb.centroids));
  return out;
}

/// Duplication pooling: run-length collapse.
inline ReducedUnits reduce_units(std::span<const int> units) {
  ReducedUnits r;
  for (int u : units) {
    if (!r.units.empty() && r.units.back() == u) {
      ++r.durations.back();
    } else {
      r.units.push_back(u);
      r.durations.push_back(1);
    }
  }
  return r;
}

inline ReducedUnits reduce_units(const UnitSequence& u) { return reduce_units(std::span<const int>(u.units)); }

inline std::vector<int> expand_units(const ReducedUnits& r) {
  if (r.units.size() != r.durations.size()) throw DataError("units and durations differ in length");
  std::vector<int> out;
  for (std::size_t i = 0; i < r.units.size(); ++i) {
    if (r.durations[i] < 1) throw DataError("duration must be >= 1, got " + std::to_string(r.durations[i]));
    out.insert(out.end(), static_cast<std::size_t>(r.durations[i]), r.units[i]);
  }
  return out;
}

}  // namespace s2ut
