#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "holmes/bc.hpp"

namespace holmes::bc {

namespace {

// Clockwise on screen (rows grow downward), starting west.
constexpr std::array<std::array<int, 2>, 8> kMoore{{
    {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1},
}};

int direction_index(int dy, int dx) {
  for (int i = 0; i < 8; ++i)
    if (kMoore[i][0] == dy && kMoore[i][1] == dx) return i;
  return -1;
}

// Labels 8-connected foreground components; returns the label image and the
// label of the largest one (0 when there is no foreground).
int largest_component(const std::vector<char>& fg, int h, int w, std::vector<int>& labels) {
  labels.assign(fg.size(), 0);
  int next = 0, best = 0;
  std::size_t best_size = 0;
  std::vector<int> stack;
  for (int start = 0; start < h * w; ++start) {
    if (!fg[start] || labels[start]) continue;
    ++next;
    std::size_t size = 0;
    labels[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++size;
      const int y = p / w, x = p % w;
      for (const auto& d : kMoore) {
        const int ny = y + d[0], nx = x + d[1];
        if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
        const int q = ny * w + nx;
        if (fg[q] && !labels[q]) {
          labels[q] = next;
          stack.push_back(q);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = next;
    }
  }
  return best;
}

}  // namespace

double Contour::perimeter() const {
  if (points.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& a = points[i];
    const Point& b = points[(i + 1) % points.size()];
    total += std::hypot(b.x - a.x, b.y - a.y);
  }
  return total;
}

Contour extract_contour(const Grid& o, double threshold) {
  const int h = o.height(), w = o.width();
  std::vector<char> fg(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) fg[i] = o.data()[i] > threshold;
  std::vector<int> labels;
  const int label = largest_component(fg, h, w, labels);
  Contour contour;
  if (label == 0) return contour;

  auto inside = [&](int y, int x) {
    return y >= 0 && x >= 0 && y < h && x < w && labels[static_cast<std::size_t>(y) * w + x] == label;
  };

  int sy = -1, sx = -1;
  for (int p = 0; p < h * w && sy < 0; ++p)
    if (labels[p] == label) {
      sy = p / w;
      sx = p % w;
    }

  // Neighbor search from the pixel the tracer entered from; the first
  // foreground hit becomes the next boundary pixel.
  auto advance = [&](int y, int x, int back_dir, int& ny, int& nx, int& nback) {
    for (int k = 1; k <= 8; ++k) {
      const int d = (back_dir + k) % 8;
      const int cy = y + kMoore[d][0], cx = x + kMoore[d][1];
      if (!inside(cy, cx)) continue;
      const int prev = (back_dir + k - 1) % 8;
      const int by = y + kMoore[prev][0], bx = x + kMoore[prev][1];
      ny = cy;
      nx = cx;
      nback = direction_index(by - cy, bx - cx);
      return true;
    }
    return false;
  };

  contour.points.push_back({static_cast<double>(sx), static_cast<double>(sy)});
  int fy = sy, fx = sx, fback = 0;
  if (!advance(sy, sx, 0, fy, fx, fback)) return contour;  // isolated pixel

  int y = fy, x = fx, back = fback;
  const std::size_t limit = 4 * o.size() + 8;
  while (contour.points.size() < limit) {
    if (y == sy && x == sx) {
      int ny = y, nx = x, nback = back;
      advance(y, x, back, ny, nx, nback);
      if (ny == fy && nx == fx) break;  // about to repeat the first move
      contour.points.push_back({static_cast<double>(x), static_cast<double>(y)});
      y = ny;
      x = nx;
      back = nback;
      continue;
    }
    contour.points.push_back({static_cast<double>(x), static_cast<double>(y)});
    int ny = y, nx = x, nback = back;
    advance(y, x, back, ny, nx, nback);
    y = ny;
    x = nx;
    back = nback;
  }
  return contour;
}

std::vector<std::array<double, 4>> efa_coefficients(std::span<const Point> polygon, int harmonics) {
  std::vector<std::array<double, 4>> coeffs(static_cast<std::size_t>(harmonics), {0.0, 0.0, 0.0, 0.0});
  const std::size_t k = polygon.size();
  if (k < 2) return coeffs;
  std::vector<double> dx(k), dy(k), dt(k), t(k + 1, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const Point& a = polygon[p];
    const Point& b = polygon[(p + 1) % k];
    dx[p] = b.x - a.x;
    dy[p] = b.y - a.y;
    dt[p] = std::hypot(dx[p], dy[p]);
    t[p + 1] = t[p] + dt[p];
  }
  const double period = t[k];
  if (period <= 0.0) return coeffs;
  for (int n = 1; n <= harmonics; ++n) {
    const double w = 2.0 * n * std::numbers::pi / period;
    const double scale = period / (2.0 * n * n * std::numbers::pi * std::numbers::pi);
    double a = 0, b = 0, c = 0, d = 0;
    for (std::size_t p = 0; p < k; ++p) {
      if (dt[p] == 0.0) continue;
      const double dcos = std::cos(w * t[p + 1]) - std::cos(w * t[p]);
      const double dsin = std::sin(w * t[p + 1]) - std::sin(w * t[p]);
      a += dx[p] / dt[p] * dcos;
      b += dx[p] / dt[p] * dsin;
      c += dy[p] / dt[p] * dcos;
      d += dy[p] / dt[p] * dsin;
    }
    coeffs[n - 1] = {scale * a, scale * b, scale * c, scale * d};
  }
  return coeffs;
}

std::vector<std::array<double, 4>> normalize_efa(std::vector<std::array<double, 4>> coeffs) {
  if (coeffs.empty()) return coeffs;
  const auto [a1, b1, c1, d1] = coeffs[0];
  // Starting point moved to the end of the first-harmonic major axis.
  const double theta = 0.5 * std::atan2(2.0 * (a1 * b1 + c1 * d1), a1 * a1 - b1 * b1 + c1 * c1 - d1 * d1);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double cs = std::cos(n * theta), sn = std::sin(n * theta);
    auto& [a, b, c, d] = coeffs[i];
    const double na = a * cs + b * sn, nb = -a * sn + b * cs;
    const double nc = c * cs + d * sn, nd = -c * sn + d * cs;
    a = na;
    b = nb;
    c = nc;
    d = nd;
  }
  // Rotate so the major axis lies along x.
  const double psi = std::atan2(coeffs[0][2], coeffs[0][0]);
  const double cp = std::cos(psi), sp = std::sin(psi);
  for (auto& [a, b, c, d] : coeffs) {
    const double na = cp * a + sp * c, nb = cp * b + sp * d;
    const double nc = -sp * a + cp * c, nd = -sp * b + cp * d;
    a = na;
    b = nb;
    c = nc;
    d = nd;
  }
  const double size = std::abs(coeffs[0][0]);
  if (size < 1e-12) {
    for (auto& row : coeffs) row = {0.0, 0.0, 0.0, 0.0};
    return coeffs;
  }
  for (auto& row : coeffs)
    for (double& v : row) v /= size;

  // The two ends of the major axis are equally valid starting points and
  // differ by the sign of every even harmonic; pick the end that makes the
  // largest even-harmonic coefficient positive.
  double strongest = 0.0;
  for (std::size_t i = 1; i < coeffs.size(); i += 2)
    for (double v : coeffs[i])
      if (std::abs(v) > std::abs(strongest) + 1e-9) strongest = v;
  if (strongest < 0.0)
    for (std::size_t i = 1; i < coeffs.size(); i += 2)
      for (double& v : coeffs[i]) v = -v;
  return coeffs;
}

FeatureVector elliptical_fourier_fv(std::span<const Point> polygon) {
  FeatureVector fv{FeatureKind::elliptical, std::vector<double>(4 * kHarmonics, 0.0)};
  if (polygon.size() < 3) return fv;
  const auto coeffs = normalize_efa(efa_coefficients(polygon, kHarmonics));
  for (std::size_t n = 0; n < coeffs.size(); ++n)
    for (std::size_t j = 0; j < 4; ++j) fv.values[4 * n + j] = coeffs[n][j];
  return fv;
}

FeatureVector elliptical_fourier_fv(const Grid& o) {
  const Contour c = extract_contour(o);
  return elliptical_fourier_fv(std::span<const Point>(c.points));
}

}  // namespace holmes::bc
