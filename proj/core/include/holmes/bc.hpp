#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "holmes/grid.hpp"

namespace holmes::bc {

enum class FeatureKind { spectrum, elliptical, statistics };

std::string_view to_string(FeatureKind k);
FeatureKind feature_kind_from_string(std::string_view s);

/// 40 for spectrum, 100 for elliptical, 17 for statistics.
std::size_t feature_length(FeatureKind k);

struct FeatureVector {
  FeatureKind kind = FeatureKind::spectrum;
  std::vector<double> values;
};

inline constexpr int kSpectrumRings = 20;
inline constexpr int kHarmonics = 25;
inline constexpr double kContourThreshold = 0.2;
inline constexpr double kVolumeEpsilon = 1e-4;
inline constexpr int kDescriptorDims = 8;

/// Ring-sector statistics of the centered power spectrum: [mu_1, sigma_1, ..., mu_20, sigma_20].
/// Requires a square grid.
FeatureVector spectrum_fourier_fv(const Grid& o);

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Closed polygon; the last point connects back to the first.
struct Contour {
  std::vector<Point> points;

  bool empty() const { return points.empty(); }
  double perimeter() const;
};

/// Outer boundary of the largest 8-connected component of (o > 0.2),
/// traced clockwise with Moore neighbor tracing. x is the column, y the row.
Contour extract_contour(const Grid& o, double threshold = kContourThreshold);

/// Raw elliptic Fourier coefficients, rows (a_n, b_n, c_n, d_n) for n = 1..harmonics.
std::vector<std::array<double, 4>> efa_coefficients(std::span<const Point> polygon, int harmonics = kHarmonics);

/// Size, rotation and starting-point normalized coefficients.
std::vector<std::array<double, 4>> normalize_efa(std::vector<std::array<double, 4>> coeffs);

/// Standardized descriptor of a polygon; zero vector when it has fewer than 3 points.
FeatureVector elliptical_fourier_fv(std::span<const Point> polygon);
FeatureVector elliptical_fourier_fv(const Grid& o);

/// [m, V_m, rho_m, C_m, hu_1..hu_7, flusser_8..flusser_13], with the centroid
/// taken as the circular mean on the torus.
FeatureVector lenia_statistics_fv(const Grid& o);

/// sign(x) log(1 + |x|) per entry.
FeatureVector signed_log(FeatureVector fv);

/// Input of the projection pipelines: the raw FV, except that statistics
/// pass through signed_log to tame the moment invariants' dynamic range.
FeatureVector compute_features(FeatureKind kind, const Grid& o);

/// Fitted PCA projection followed by percentile normalization.
struct BcProjection {
  FeatureKind kind = FeatureKind::spectrum;
  std::vector<double> mean;                      ///< input dimension
  std::vector<std::vector<double>> components;   ///< 8 orthonormal rows
  std::vector<double> z_min;                     ///< 0.01 percentile of projected reference data
  std::vector<double> z_max;                     ///< 99.9 percentile

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.size(); }
};

/// Linear-interpolated percentile (q in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

/// Fits an 8-component PCA on the reference set. Throws FitError on fewer
/// than 9 vectors, mixed kinds, or rank below the component count.
BcProjection fit_projection(std::span<const FeatureVector> reference, int components = kDescriptorDims);

/// PCA scores only, before normalization.
std::vector<double> pca_scores(const BcProjection& p, const FeatureVector& fv);

/// (PCA(fv) - z_min) / (z_max - z_min); not clipped.
std::vector<double> project(const BcProjection& p, const FeatureVector& fv);

void save_projection(const BcProjection& p, const std::filesystem::path& file);
BcProjection load_projection(const std::filesystem::path& file);

/// A fitted engineered behavioral characterization: Grid -> R^8.
class AnalyticBc {
 public:
  explicit AnalyticBc(BcProjection projection) : projection_(std::move(projection)) {}
  FeatureKind kind() const { return projection_.kind; }
  const BcProjection& projection() const { return projection_; }
  std::vector<double> describe(const Grid& o) const;

 private:
  BcProjection projection_;
};

}  // namespace holmes::bc
