#include "holmes/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "holmes/errors.hpp"

namespace holmes::eval {

BinGrid::BinGrid(int bins_per_dim) : bins_(bins_per_dim) {
  if (bins_ < 1) throw ConfigError("bins per dimension must be positive");
}

std::vector<int> BinGrid::bin_of(std::span<const double> d) const {
  std::vector<int> cell(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double v = std::clamp(d[i], 0.0, 1.0);
    cell[i] = std::min(static_cast<int>(std::floor(v * bins_)), bins_ - 1);
  }
  return cell;
}

bool BinGrid::add(std::span<const double> descriptor) { return cells_.insert(bin_of(descriptor)).second; }

std::size_t binning_diversity(std::span<const std::vector<double>> descriptors, int bins_per_dim) {
  BinGrid grid(bins_per_dim);
  for (const auto& d : descriptors) grid.add(d);
  return grid.occupied();
}

std::vector<std::size_t> binning_curve(std::span<const std::vector<double>> descriptors, int bins_per_dim) {
  BinGrid grid(bins_per_dim);
  std::vector<std::size_t> out;
  out.reserve(descriptors.size());
  for (const auto& d : descriptors) {
    grid.add(d);
    out.push_back(grid.occupied());
  }
  return out;
}

DistanceDiversity distance_diversity(std::span<const std::vector<double>> points) {
  const std::size_t s = points.size();
  if (s < 2) throw DegeneracyError("distance diversity needs at least two points");
  std::vector<double> d(s * s, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = i + 1; j < s; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < points[i].size(); ++k) acc += (points[i][k] - points[j][k]) * (points[i][k] - points[j][k]);
      d[i * s + j] = d[j * s + i] = std::sqrt(acc);
      total += 2.0 * d[i * s + j];
    }
  if (total <= 0.0) throw DegeneracyError("all points are identical");
  const double sd = static_cast<double>(s);
  DistanceDiversity out;
  out.magnitude = sd / (sd - 1.0) * total / (sd * sd);
  double sq = 0.0;
  for (double v : d) sq += (v / total) * (v / total);
  out.h = 1.0 / sq;
  out.variability = (1.0 + std::sqrt(1.0 + 4.0 * out.h)) / (2.0 * sd);
  out.diversity = 1.0 + (sd - 1.0) * out.variability * out.magnitude;
  return out;
}

namespace {

Eigen::MatrixXd centered(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw DegeneracyError("empty response matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError("ragged response matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  m.rowwise() -= m.colwise().mean();
  return m;
}

}  // namespace

double cka(std::span<const std::vector<double>> zi, std::span<const std::vector<double>> zj) {
  if (zi.size() != zj.size()) throw ConfigError("CKA inputs need the same number of rows");
  if (zi.size() < 2) throw DegeneracyError("CKA needs at least two rows");
  const Eigen::MatrixXd a = centered(zi), b = centered(zj);
  const double aa = (a.transpose() * a).norm(), bb = (b.transpose() * b).norm();
  if (aa == 0.0 || bb == 0.0) throw DegeneracyError("zero centered response matrix");
  return (a.transpose() * b).squaredNorm() / (aa * bb);
}

std::string_view to_string(PatternClass c) {
  switch (c) {
    case PatternClass::SLP: return "SLP";
    case PatternClass::TLP: return "TLP";
    case PatternClass::DEAD: return "DEAD";
  }
  return "?";
}

PatternClass pattern_class_from_string(std::string_view s) {
  if (s == "SLP" || s == "slp") return PatternClass::SLP;
  if (s == "TLP" || s == "tlp") return PatternClass::TLP;
  if (s == "DEAD" || s == "dead") return PatternClass::DEAD;
  throw ConfigError("unknown pattern class " + std::string(s));
}

namespace {

// Smallest circular arc covering every marked index.
int circular_extent(const std::vector<char>& marked) {
  const int n = static_cast<int>(marked.size());
  int count = 0, longest_gap = 0, run = 0;
  for (int i = 0; i < 2 * n; ++i) {
    if (marked[i % n]) {
      run = 0;
      if (i < n) ++count;
    } else {
      run = std::min(run + 1, n);
      longest_gap = std::max(longest_gap, run);
    }
  }
  return count == 0 ? 0 : n - longest_gap;
}

}  // namespace

PatternClass classify_pattern(const Grid& o, const ClassifierConfig& cfg) {
  const int h = o.height(), w = o.width();
  std::size_t active = 0;
  double total = 0.0;
  for (double v : o.data()) {
    active += v > 1e-4;
    total += v;
  }
  if (static_cast<double>(active) / static_cast<double>(o.size()) < cfg.dead_volume) return PatternClass::DEAD;

  std::vector<int> label(o.size(), 0);
  std::vector<int> stack;
  int next = 0, best = 0;
  double best_mass = -1.0;
  for (int start = 0; start < h * w; ++start) {
    if (o.data()[start] <= cfg.component_threshold || label[start]) continue;
    ++next;
    double mass = 0.0;
    label[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      mass += o.data()[p];
      const int y = p / w, x = p % w;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int q = ((y + dy + h) % h) * w + (x + dx + w) % w;
          if (o.data()[q] > cfg.component_threshold && !label[q]) {
            label[q] = next;
            stack.push_back(q);
          }
        }
    }
    if (mass > best_mass) {
      best_mass = mass;
      best = next;
    }
  }
  if (best == 0 || best_mass < cfg.mass_fraction * total) return PatternClass::TLP;
  std::vector<char> rows(h, 0), cols(w, 0);
  for (int p = 0; p < h * w; ++p)
    if (label[p] == best) {
      rows[p / w] = 1;
      cols[p % w] = 1;
    }
  const bool compact = circular_extent(rows) < cfg.max_extent * h && circular_extent(cols) < cfg.max_extent * w;
  return compact ? PatternClass::SLP : PatternClass::TLP;
}

std::map<std::string, double> score_leaves(std::span<const std::string> leaves, const History& history,
                                           std::span<const PatternClass> classes, PatternClass preference) {
  if (classes.size() != history.size()) throw ConfigError("one class per history record is required");
  std::map<std::string, double> scores;
  for (const auto& leaf : leaves) {
    double count = 0.0;
    for (std::size_t i : history.members(leaf)) count += classes[i] == preference;
    scores[leaf] = count;
  }
  return scores;
}

std::vector<std::size_t> representative_set(std::span<const std::vector<double>> descriptors, std::size_t size,
                                            int candidates, Rng& rng) {
  const std::size_t n = descriptors.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (n <= size) return all;
  std::vector<std::size_t> best;
  double best_d = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> pts(size);
  for (int c = 0; c < candidates; ++c) {
    // Partial Fisher-Yates: the first `size` entries are a uniform subset.
    for (std::size_t k = 0; k < size; ++k) std::swap(all[k], all[k + rng.index(n - k)]);
    std::vector<std::size_t> pick(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size));
    std::sort(pick.begin(), pick.end());
    for (std::size_t k = 0; k < size; ++k) pts[k] = descriptors[pick[k]];
    double d = 1.0;
    if (size >= 2) {
      try {
        d = distance_diversity(pts).diversity;
      } catch (const DegeneracyError&) {
        d = 1.0;
      }
    }
    if (d > best_d) {
      best_d = d;
      best = std::move(pick);
    }
  }
  return best;
}

}  // namespace holmes::eval
