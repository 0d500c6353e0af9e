#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "holmes/bc.hpp"
#include "holmes/binary_io.hpp"
#include "holmes/errors.hpp"

namespace holmes::bc {

std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::spectrum: return "spectrum";
    case FeatureKind::elliptical: return "elliptical";
    case FeatureKind::statistics: return "statistics";
  }
  return "spectrum";
}

FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "spectrum") return FeatureKind::spectrum;
  if (s == "elliptical") return FeatureKind::elliptical;
  if (s == "statistics") return FeatureKind::statistics;
  throw ConfigError("unknown behavioral characterization '" + std::string(s) + "'");
}

std::size_t feature_length(FeatureKind k) {
  switch (k) {
    case FeatureKind::spectrum: return 2 * kSpectrumRings;
    case FeatureKind::elliptical: return 4 * kHarmonics;
    case FeatureKind::statistics: return 17;
  }
  return 0;
}

FeatureVector compute_features(FeatureKind kind, const Grid& o) {
  switch (kind) {
    case FeatureKind::spectrum: return spectrum_fourier_fv(o);
    case FeatureKind::elliptical: return elliptical_fourier_fv(o);
    case FeatureKind::statistics: return signed_log(lenia_statistics_fv(o));
  }
  throw ConfigError("unknown feature kind");
}

FeatureVector signed_log(FeatureVector fv) {
  for (double& v : fv.values) v = std::copysign(std::log1p(std::abs(v)), v);
  return fv;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw FitError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BcProjection fit_projection(std::span<const FeatureVector> reference, int components) {
  const std::size_t n = reference.size();
  if (n < static_cast<std::size_t>(components) + 1) {
    std::ostringstream os;
    os << "projection needs at least " << components + 1 << " reference vectors, got " << n;
    throw FitError(os.str());
  }
  const FeatureKind kind = reference[0].kind;
  const std::size_t dim = reference[0].values.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    if (reference[i].kind != kind || reference[i].values.size() != dim)
      throw FitError("reference vectors have mixed kinds or lengths");
    for (std::size_t j = 0; j < dim; ++j) x(i, j) = reference[i].values[j];
  }
  if (dim < static_cast<std::size_t>(components)) throw FitError("feature dimension below component count");

  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd values = eig.eigenvalues();  // ascending
  const double top = std::max(values.maxCoeff(), 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values(i) > top * 1e-12 && values(i) > 0.0) ++rank;
  if (rank < components) {
    std::ostringstream os;
    os << "reference set has rank " << rank << ", below the " << components << " requested components";
    throw FitError(os.str());
  }

  BcProjection p;
  p.kind = kind;
  p.mean.assign(mean.data(), mean.data() + dim);
  for (int c = 0; c < components; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(dim) - 1 - c);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;  // deterministic sign
    p.components.emplace_back(v.data(), v.data() + dim);
  }

  const Eigen::MatrixXd comp = [&] {
    Eigen::MatrixXd m(components, static_cast<Eigen::Index>(dim));
    for (int c = 0; c < components; ++c)
      for (std::size_t j = 0; j < dim; ++j) m(c, j) = p.components[c][j];
    return m;
  }();
  const Eigen::MatrixXd z = centered * comp.transpose();
  for (int c = 0; c < components; ++c) {
    std::vector<double> col(z.col(c).data(), z.col(c).data() + n);
    const double lo = percentile(col, 0.01);
    const double hi = percentile(col, 99.9);
    if (!(hi > lo)) throw FitError("projected reference data has zero spread");
    p.z_min.push_back(lo);
    p.z_max.push_back(hi);
  }
  return p;
}

std::vector<double> pca_scores(const BcProjection& p, const FeatureVector& fv) {
  if (fv.kind != p.kind || fv.values.size() != p.input_dim())
    throw ConfigError("feature vector does not match the projection");
  std::vector<double> z(p.output_dim(), 0.0);
  for (std::size_t c = 0; c < p.output_dim(); ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.input_dim(); ++j) s += (fv.values[j] - p.mean[j]) * p.components[c][j];
    z[c] = s;
  }
  return z;
}

std::vector<double> project(const BcProjection& p, const FeatureVector& fv) {
  std::vector<double> z = pca_scores(p, fv);
  for (std::size_t c = 0; c < z.size(); ++c) z[c] = (z[c] - p.z_min[c]) / (p.z_max[c] - p.z_min[c]);
  return z;
}

void save_projection(const BcProjection& p, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IntegrityError("cannot write " + file.string());
  io::write_magic(os, "HBCP");
  io::write_u32(os, 1);
  io::write_u32(os, static_cast<std::uint32_t>(p.kind));
  io::write_u32(os, static_cast<std::uint32_t>(p.input_dim()));
  io::write_u32(os, static_cast<std::uint32_t>(p.output_dim()));
  for (double v : p.mean) io::write_f64(os, v);
  for (const auto& row : p.components)
    for (double v : row) io::write_f64(os, v);
  for (double v : p.z_min) io::write_f64(os, v);
  for (double v : p.z_max) io::write_f64(os, v);
  if (!os) throw IntegrityError("failed writing " + file.string());
}

BcProjection load_projection(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IntegrityError("cannot open " + file.string());
  io::expect_magic(is, "HBCP");
  if (io::read_u32(is) != 1) throw ValidationError("unsupported projection version");
  BcProjection p;
  const auto kind = io::read_u32(is);
  if (kind > 2) throw ValidationError("unknown projection kind");
  p.kind = static_cast<FeatureKind>(kind);
  const auto in = io::read_u32(is);
  const auto out = io::read_u32(is);
  p.mean.resize(in);
  for (double& v : p.mean) v = io::read_f64(is);
  p.components.assign(out, std::vector<double>(in));
  for (auto& row : p.components)
    for (double& v : row) v = io::read_f64(is);
  p.z_min.resize(out);
  p.z_max.resize(out);
  for (double& v : p.z_min) v = io::read_f64(is);
  for (double& v : p.z_max) v = io::read_f64(is);
  return p;
}

std::vector<double> AnalyticBc::describe(const Grid& o) const {
  return project(projection_, compute_features(projection_.kind, o));
}

}  // namespace holmes::bc
