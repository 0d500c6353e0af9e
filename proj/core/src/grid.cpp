#include "holmes/grid.hpp"

#include <algorithm>
#include <numeric>

#include "holmes/errors.hpp"

namespace holmes {

Grid::Grid(GridShape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.cells()) throw ConfigError("grid value count does not match its shape");
}

double Grid::wrapped(int y, int x) const {
  y %= shape_.height;
  x %= shape_.width;
  if (y < 0) y += shape_.height;
  if (x < 0) x += shape_.width;
  return at(y, x);
}

double Grid::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }
double Grid::min() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }
double Grid::max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

Grid roll(const Grid& g, int dy, int dx) {
  Grid out(g.shape());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) out.at(y, x) = g.wrapped(y - dy, x - dx);
  return out;
}

Grid rotate90(const Grid& g) {
  if (g.height() != g.width()) throw ConfigError("rotate90 requires a square grid");
  const int n = g.height();
  Grid out(g.shape());
  // numpy.rot90: out[i][j] = in[j][n - 1 - i]
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = g.at(j, n - 1 - i);
  return out;
}

Grid flip_horizontal(const Grid& g) {
  Grid out(g.shape());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) out.at(y, x) = g.at(y, g.width() - 1 - x);
  return out;
}

Grid flip_vertical(const Grid& g) {
  Grid out(g.shape());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) out.at(y, x) = g.at(g.height() - 1 - y, x);
  return out;
}

Grid quantize_f32(const Grid& g) {
  Grid out = g;
  for (double& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace holmes
