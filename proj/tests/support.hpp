#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dagcd/dataset.hpp"
#include "dagcd/graph.hpp"
#include "dagcd/multilogit.hpp"

namespace testing {

inline dagcd::CategoricalDataset random_dataset(std::mt19937_64& rng, int n, int p, int max_levels,
                                                bool interventions = false) {
  std::uniform_int_distribution<int> lev(2, max_levels);
  std::vector<int> levels(p);
  for (int& r : levels) r = lev(rng);
  std::vector<int> values(static_cast<std::size_t>(n) * p);
  for (int h = 0; h < n; ++h)
    for (int j = 0; j < p; ++j) values[h * p + j] = std::uniform_int_distribution<int>(1, levels[j])(rng);
  std::vector<int> intervened;
  if (interventions) {
    intervened.assign(n, dagcd::CategoricalDataset::kNoIntervention);
    for (int h = 0; h < n; ++h)
      if (rng() % 3 == 0) intervened[h] = static_cast<int>(rng() % p);
  }
  return dagcd::CategoricalDataset(n, p, std::move(values), std::move(levels), std::move(intervened));
}

/// Random coefficients on a random DAG (edges i -> j only for i < j), groups centred over levels.
inline dagcd::ParamVector random_params(const dagcd::CategoricalDataset& ds, std::mt19937_64& rng, double scale,
                                        double edge_prob = 0.5) {
  dagcd::ParamVector beta(ds.levels());
  std::normal_distribution<double> z(0.0, scale);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int j = 0; j < ds.p(); ++j) {
    auto b0 = beta.intercepts(j);
    for (std::size_t l = 1; l < b0.size(); ++l) b0[l] = z(rng);
    for (int i = 0; i < j; ++i) {
      if (u(rng) >= edge_prob) continue;
      auto g = beta.group(j, i);
      const int d = ds.levels(i) - 1, r = ds.levels(j);
      for (double& v : g) v = z(rng);
      for (int k = 0; k < d; ++k) {
        double mean = 0.0;
        for (int l = 0; l < r; ++l) mean += g[l * d + k];
        for (int l = 0; l < r; ++l) g[l * d + k] -= mean / r;
      }
    }
  }
  return beta;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dagcd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Free-group predicate (child, parent) allowing every edge consistent with a topological order.
inline std::function<bool(int, int)> order_consistent(const std::vector<int>& order) {
  std::vector<int> pos(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = static_cast<int>(k);
  return [pos](int j, int i) { return i != j && pos[i] < pos[j]; };
}

/**
 * Accelerated proximal gradient with restarts on the penalized objective,
 * groups outside `free_group` held at zero. Intercepts are always free with
 * beta_{j10} = 0. Shares nothing with the coordinate-descent code beyond the
 * likelihood and gradient functions.
 */
inline dagcd::ParamVector reference_fit(const dagcd::CategoricalDataset& ds, const dagcd::PenaltyConfig& pen,
                                        const std::function<bool(int, int)>& free_group, int iterations) {
  using namespace dagcd;
  const int p = ds.p();
  std::vector<std::pair<int, int>> blocks;
  for (int j = 0; j < p; ++j)
    for (int i = kIntercept; i < p; ++i)
      if (i == kIntercept || free_group(j, i)) blocks.emplace_back(j, i);
  auto objective = [&](const ParamVector& b) { return penalized_objective(b, ds, pen); };

  ParamVector x(ds.levels()), y = x;
  double t = 1.0, L = 1.0;
  std::vector<std::vector<double>> grads(blocks.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t b = 0; b < blocks.size(); ++b) grads[b] = block_gradient(y, ds, blocks[b].first, blocks[b].second);
    const double smooth_y = -loglik(y, ds);
    ParamVector next;
    for (;;) {
      next = y;
      double lin = 0.0, quad = 0.0;
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto [j, i] = blocks[b];
        auto blk = next.block(j, i);
        std::vector<double> v(blk.size());
        for (std::size_t k = 0; k < blk.size(); ++k) v[k] = blk[k] + grads[b][k] / L;
        double scale = 1.0;
        if (i == kIntercept) {
          v[0] = 0.0;
        } else {
          const double nv = norm2(v), thr = pen.lambda * pen.weight(j, i) / L;
          scale = nv > thr ? 1.0 - thr / nv : 0.0;
        }
        auto c = y.block(j, i);
        for (std::size_t k = 0; k < blk.size(); ++k) {
          blk[k] = scale * v[k];
          lin -= grads[b][k] * (blk[k] - c[k]);
          quad += (blk[k] - c[k]) * (blk[k] - c[k]);
        }
      }
      if (-loglik(next, ds) <= smooth_y + lin + 0.5 * L * quad + 1e-13 * (1.0 + std::abs(smooth_y))) break;
      L *= 2.0;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const bool restart = objective(next) > objective(x);
    auto xs = next.raw();
    auto xo = x.raw();
    auto ys = y.raw();
    for (std::size_t k = 0; k < xs.size(); ++k) ys[k] = restart ? xs[k] : xs[k] + (t - 1.0) / t_next * (xs[k] - xo[k]);
    t = restart ? 1.0 : t_next;
    x = std::move(next);
  }
  return x;
}

}  // namespace testing
