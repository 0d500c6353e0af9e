#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace holmes {

struct GridShape {
  int height = 256;
  int width = 256;

  std::size_t cells() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Row-major 2-D activation field on a torus. Values are expected in [0, 1].
class Grid {
 public:
  Grid() = default;
  explicit Grid(GridShape shape, double fill = 0.0)
      : shape_(shape), values_(shape.cells(), fill) {}
  Grid(GridShape shape, std::vector<double> values);

  GridShape shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return values_.size(); }

  double& at(int y, int x) { return values_[static_cast<std::size_t>(y) * shape_.width + x]; }
  double at(int y, int x) const { return values_[static_cast<std::size_t>(y) * shape_.width + x]; }

  /// Toroidal access: indices are wrapped into range.
  double wrapped(int y, int x) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  double sum() const;
  double min() const;
  double max() const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  GridShape shape_{0, 0};
  std::vector<double> values_;
};

/// Cyclic shift: result(y, x) = g(y - dy, x - dx).
Grid roll(const Grid& g, int dy, int dx);

/// Counter-clockwise quarter turn (numpy rot90 semantics). Requires a square grid.
Grid rotate90(const Grid& g);

Grid flip_horizontal(const Grid& g);
Grid flip_vertical(const Grid& g);

/// Round every value through 32-bit float, matching the on-disk pattern format.
Grid quantize_f32(const Grid& g);

}  // namespace holmes
