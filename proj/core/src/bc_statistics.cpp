#include <cmath>
#include <complex>
#include <numbers>

#include "holmes/bc.hpp"

namespace holmes::bc {

namespace {

// Weighted circular mean of a coordinate on a ring of the given length.
double circular_mean(const std::vector<double>& weight_per_index, int length) {
  double s = 0.0, c = 0.0;
  for (int i = 0; i < length; ++i) {
    const double a = 2.0 * std::numbers::pi * i / length;
    s += weight_per_index[i] * std::sin(a);
    c += weight_per_index[i] * std::cos(a);
  }
  double angle = std::atan2(s, c);
  if (angle < 0) angle += 2.0 * std::numbers::pi;
  return angle * length / (2.0 * std::numbers::pi);
}

// Signed toroidal offset in [-length/2, length/2).
double wrap_offset(double d, int length) {
  const double half = 0.5 * length;
  d = std::fmod(d + half, static_cast<double>(length));
  if (d < 0) d += length;
  return d - half;
}

}  // namespace

FeatureVector lenia_statistics_fv(const Grid& o) {
  const int h = o.height(), w = o.width();
  const double cells = static_cast<double>(o.size());
  FeatureVector fv{FeatureKind::statistics, std::vector<double>(17, 0.0)};

  double mass_sum = 0.0;
  std::size_t active = 0;
  std::vector<double> row_mass(h, 0.0), col_mass(w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = o.at(y, x);
      mass_sum += v;
      if (v > kVolumeEpsilon) ++active;
      row_mass[y] += v;
      col_mass[x] += v;
    }
  const double m = mass_sum / cells;
  const double volume = static_cast<double>(active) / cells;
  fv.values[0] = m;
  fv.values[1] = volume;
  fv.values[2] = volume > 0.0 ? m / volume : 0.0;
  if (mass_sum <= 0.0) return fv;

  const double cy = circular_mean(row_mass, h);
  const double cx = circular_mean(col_mass, w);
  std::vector<double> oy(h), ox(w);
  for (int y = 0; y < h; ++y) oy[y] = wrap_offset(y - cy, h);
  for (int x = 0; x < w; ++x) ox[x] = wrap_offset(x - cx, w);

  // Centeredness: mass-weighted average of (1 - d / max d)^2.
  double max_d = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) max_d = std::max(max_d, std::hypot(oy[y], ox[x]));
  double centered = 0.0;
  double ex = 0.0, ey = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = o.at(y, x);
      if (v == 0.0) continue;
      const double wgt = 1.0 - std::hypot(oy[y], ox[x]) / max_d;
      centered += wgt * wgt * v;
      ex += v * ox[x];
      ey += v * oy[y];
    }
  fv.values[3] = centered / mass_sum;
  ex /= mass_sum;
  ey /= mass_sum;

  // Central moments up to order 4 in the unwrapped frame around the centroid.
  double mu[5][5] = {};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = o.at(y, x);
      if (v == 0.0) continue;
      const double X = ox[x] - ex, Y = oy[y] - ey;
      double xp = 1.0;
      for (int p = 0; p <= 4; ++p) {
        double yq = 1.0;
        for (int q = 0; p + q <= 4; ++q) {
          mu[p][q] += v * xp * yq;
          yq *= Y;
        }
        xp *= X;
      }
    }
  auto eta = [&](int p, int q) { return mu[p][q] / std::pow(mu[0][0], 1.0 + 0.5 * (p + q)); };
  const double n20 = eta(2, 0), n02 = eta(0, 2), n11 = eta(1, 1);
  const double n30 = eta(3, 0), n03 = eta(0, 3), n21 = eta(2, 1), n12 = eta(1, 2);
  const double n40 = eta(4, 0), n04 = eta(0, 4), n22 = eta(2, 2), n31 = eta(3, 1), n13 = eta(1, 3);

  const double s1 = n30 + n12, s2 = n21 + n03;
  const double d1 = n30 - 3.0 * n12, d2 = 3.0 * n21 - n03;
  double* hu = &fv.values[4];
  hu[0] = n20 + n02;
  hu[1] = (n20 - n02) * (n20 - n02) + 4.0 * n11 * n11;
  hu[2] = d1 * d1 + d2 * d2;
  hu[3] = s1 * s1 + s2 * s2;
  hu[4] = d1 * s1 * (s1 * s1 - 3.0 * s2 * s2) + d2 * s2 * (3.0 * s1 * s1 - s2 * s2);
  hu[5] = (n20 - n02) * (s1 * s1 - s2 * s2) + 4.0 * n11 * s1 * s2;
  hu[6] = d2 * s1 * (s1 * s1 - 3.0 * s2 * s2) - d1 * s2 * (3.0 * s1 * s1 - s2 * s2);

  // Flusser: the missing third-order invariant, then the fourth-order set
  // built from complex moments c_pq.
  double* fl = &fv.values[11];
  fl[0] = n11 * (s1 * s1 - s2 * s2) - (n20 - n02) * s1 * s2;
  const std::complex<double> c12(s1, -s2);
  const std::complex<double> c31(n40 - n04, 2.0 * (n31 + n13));
  const std::complex<double> c40(n40 - 6.0 * n22 + n04, 4.0 * (n31 - n13));
  const double c22 = n40 + 2.0 * n22 + n04;
  const std::complex<double> p31 = c31 * c12 * c12;
  const std::complex<double> p40 = c40 * c12 * c12 * c12 * c12;
  fl[1] = c22;
  fl[2] = p31.real();
  fl[3] = p31.imag();
  fl[4] = p40.real();
  fl[5] = p40.imag();
  return fv;
}

}  // namespace holmes::bc
