#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>

#include "holmes/bc.hpp"
#include "holmes/errors.hpp"

namespace holmes::bc {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Full complex spectrum of a real square image, F(u, v) / N^2.
std::vector<std::complex<double>> normalized_dft(const Grid& o) {
  const int n = o.height();
  std::vector<std::complex<double>> in(o.size()), out(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) in[i] = o.data()[i];
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex());
    plan = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  const double scale = 1.0 / (static_cast<double>(n) * n);
  for (auto& c : out) c *= scale;
  return out;
}

}  // namespace

FeatureVector spectrum_fourier_fv(const Grid& o) {
  if (o.height() != o.width()) throw ConfigError("spectrum descriptor requires a square grid");
  const int n = o.height();
  const int half = n / 2;
  const auto spectrum = normalized_dft(o);
  auto wrap = [n](int k) { return ((k % n) + n) % n; };

  // Lower half of the centered spectrum: u in [0, N/2] (Nyquist row
  // included), v in [-N/2, N/2 - 1].
  struct Sample {
    int u, v;
    double power;
  };
  std::vector<Sample> kept;
  kept.reserve(static_cast<std::size_t>(half + 1) * n);
  double mean = 0.0;
  for (int u = 0; u <= half; ++u) {
    for (int v = -half; v < n - half; ++v) {
      const auto f = spectrum[static_cast<std::size_t>(wrap(u)) * n + wrap(v)];
      const double p = std::norm(f);
      kept.push_back({u, v, p});
      mean += p;
    }
  }
  mean /= static_cast<double>(kept.size());
  for (auto& s : kept)
    if (s.power < mean) s.power = 0.0;

  FeatureVector fv{FeatureKind::spectrum, std::vector<double>(2 * kSpectrumRings, 0.0)};
  for (int i = 0; i < kSpectrumRings; ++i) {
    const double r1 = static_cast<double>(i) / kSpectrumRings * half;
    const double r2 = static_cast<double>(i + 1) / kSpectrumRings * half;
    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    for (const auto& s : kept) {
      const double rr = static_cast<double>(s.u) * s.u + static_cast<double>(s.v) * s.v;
      if (rr < r1 * r1 || rr > r2 * r2) continue;
      sum += s.power;
      ++count;
    }
    if (count == 0) continue;
    const double mu = sum / static_cast<double>(count);
    for (const auto& s : kept) {
      const double rr = static_cast<double>(s.u) * s.u + static_cast<double>(s.v) * s.v;
      if (rr < r1 * r1 || rr > r2 * r2) continue;
      sum_sq += (s.power - mu) * (s.power - mu);
    }
    fv.values[2 * i] = mu;
    fv.values[2 * i + 1] = std::sqrt(sum_sq / static_cast<double>(count));
  }
  return fv;
}

}  // namespace holmes::bc
