#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <vector>

#include "holmes/grid.hpp"
#include "holmes/lenia.hpp"

// Reference implementations kept independent of the library code paths
// they check.
namespace oracle {

using holmes::Grid;

/// Direct circular convolution with the kernel laid out at index (0, 0).
inline Grid circular_convolve(const Grid& a, const holmes::lenia::KernelSpec& k) {
  const int h = a.height(), w = a.width();
  std::vector<std::pair<int, double>> taps;
  for (int i = 0; i < h * w; ++i)
    if (k.values[i] != 0.0) taps.emplace_back(i, k.values[i]);
  Grid u(a.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (const auto& [i, v] : taps) {
        const int dy = i / w, dx = i % w;
        s += v * a.at(((y - dy) % h + h) % h, ((x - dx) % w + w) % w);
      }
      u.at(y, x) = s;
    }
  return u;
}

inline double growth(double u, double mu, double sigma) {
  const double z = (u - mu) / sigma;
  return 2.0 * std::exp(-0.5 * z * z) - 1.0;
}

inline Grid lenia_step(const Grid& a, const holmes::lenia::KernelSpec& k, const holmes::lenia::UpdateRuleParams& p) {
  const Grid u = circular_convolve(a, k);
  Grid out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = std::clamp(a.data()[i] + growth(u.data()[i], p.mu, p.sigma) / p.T, 0.0, 1.0);
  return out;
}

/// Occupied cells of a regular grid over the clipped unit cube.
inline std::size_t occupied_bins(std::span<const std::vector<double>> points, int bins) {
  std::set<std::vector<int>> cells;
  for (const auto& p : points) {
    std::vector<int> cell;
    for (double v : p) {
      const double c = std::min(1.0, std::max(0.0, v));
      cell.push_back(std::min(bins - 1, static_cast<int>(std::floor(c * bins))));
    }
    cells.insert(cell);
  }
  return cells.size();
}

/// Exact 2-means by Gray-code enumeration of every bipartition.
/// Returns 0/1 labels of the optimal partition.
inline std::vector<int> exhaustive_two_means(std::span<const std::vector<double>> x) {
  const std::size_t n = x.size(), d = x.front().size();
  if (n > 30) return {};
  double total_sq = 0.0;
  std::vector<double> all(d, 0.0);
  for (const auto& p : x)
    for (std::size_t j = 0; j < d; ++j) {
      all[j] += p[j];
      total_sq += p[j] * p[j];
    }
  // Point n-1 stays in cluster 0; subsets of the others join cluster 1.
  std::vector<double> s1(d, 0.0);
  std::vector<int> in(n, 0);
  std::size_t n1 = 0;
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t best_code = 0, code = 0;
  const std::uint64_t count = 1ull << (n - 1);
  for (std::uint64_t g = 1; g < count; ++g) {
    const int bit = __builtin_ctzll(g);
    const double sign = in[bit] ? -1.0 : 1.0;
    in[bit] ^= 1;
    n1 = in[bit] ? n1 + 1 : n1 - 1;
    code ^= 1ull << bit;
    for (std::size_t j = 0; j < d; ++j) s1[j] += sign * x[bit][j];
    if (n1 == 0) continue;
    double a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      a += s1[j] * s1[j];
      const double r = all[j] - s1[j];
      b += r * r;
    }
    const double inertia = total_sq - a / static_cast<double>(n1) - b / static_cast<double>(n - n1);
    if (inertia < best) {
      best = inertia;
      best_code = code;
    }
  }
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) labels[i] = (best_code >> i) & 1;
  return labels;
}

/// Column-centered linear CKA through n x n Gram matrices.
inline double cka_gram(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b) {
  const std::size_t n = a.size();
  auto centered = [n](std::span<const std::vector<double>> z) {
    const std::size_t k = z.front().size();
    std::vector<double> mean(k, 0.0);
    for (const auto& r : z)
      for (std::size_t j = 0; j < k; ++j) mean[j] += r[j] / static_cast<double>(n);
    std::vector<std::vector<double>> out(z.begin(), z.end());
    for (auto& r : out)
      for (std::size_t j = 0; j < k; ++j) r[j] -= mean[j];
    return out;
  };
  const auto ca = centered(a), cb = centered(b);
  auto gram = [n](const std::vector<std::vector<double>>& z) {
    std::vector<double> g(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < z[i].size(); ++t) s += z[i][t] * z[j][t];
        g[i * n + j] = s;
      }
    return g;
  };
  const auto ka = gram(ca), kb = gram(cb);
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) {
    ab += ka[i] * kb[i];
    aa += ka[i] * ka[i];
    bb += kb[i] * kb[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace oracle
