#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "holmes/grid.hpp"
#include "holmes/history.hpp"
#include "holmes/rng.hpp"

namespace holmes::eval {

/// Sparse occupancy of a regular grid over the unit cube.
class BinGrid {
 public:
  explicit BinGrid(int bins_per_dim = 20);

  /// Clips to [0, 1] per dimension; 1 maps to the last bin. Returns true if the bin was new.
  bool add(std::span<const double> descriptor);
  std::size_t occupied() const { return cells_.size(); }
  int bins_per_dim() const { return bins_; }

  std::vector<int> bin_of(std::span<const double> descriptor) const;

 private:
  int bins_;
  std::set<std::vector<int>> cells_;
};

/// Number of occupied bins.
std::size_t binning_diversity(std::span<const std::vector<double>> descriptors, int bins_per_dim = 20);

/// Occupied-bin count after each descriptor, in order.
std::vector<std::size_t> binning_curve(std::span<const std::vector<double>> descriptors, int bins_per_dim = 20);

struct DistanceDiversity {
  double magnitude = 0.0;    ///< M
  double h = 0.0;            ///< H = 1 / sum of squared normalized distances
  double variability = 0.0;  ///< E
  double diversity = 0.0;    ///< D = 1 + (S - 1) E M
};

/// Euclidean set diversity. Throws DegeneracyError for fewer than two
/// points or when all points coincide.
DistanceDiversity distance_diversity(std::span<const std::vector<double>> points);

/// Linear CKA between two n x k response matrices given as rows. Throws
/// DegeneracyError when either centered matrix is zero.
double cka(std::span<const std::vector<double>> zi, std::span<const std::vector<double>> zj);

enum class PatternClass { SLP, TLP, DEAD };
std::string_view to_string(PatternClass c);
PatternClass pattern_class_from_string(std::string_view s);

struct ClassifierConfig {
  double dead_volume = 1e-4;         ///< DEAD when the active-cell fraction is below this
  double component_threshold = 0.1;  ///< foreground for connected components
  double mass_fraction = 0.9;        ///< largest component share of total mass
  double max_extent = 0.6;           ///< bounding box fraction of the grid per axis
};

/// Mass-concentration and bounding-box heuristic on the torus.
PatternClass classify_pattern(const Grid& o, const ClassifierConfig& config = {});

/// Leaf score = count of preferred-class patterns routed to the leaf.
/// `classes` holds one class per history record.
std::map<std::string, double> score_leaves(std::span<const std::string> leaves, const History& history,
                                           std::span<const PatternClass> classes, PatternClass preference);

/// Index set of size `size` maximizing distance diversity among `candidates`
/// random draws. Returns every index when the population is not larger than `size`.
std::vector<std::size_t> representative_set(std::span<const std::vector<double>> descriptors, std::size_t size,
                                            int candidates, Rng& rng);

}  // namespace holmes::eval
