#include "holmes/lenia.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "holmes/errors.hpp"

namespace holmes::lenia {

namespace {

// Plan creation in FFTW is not thread-safe; execution with the new-array
// interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void check_interval(const char* name, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    std::ostringstream os;
    os << "update rule parameter " << name << " = " << v << " outside [" << lo << ", " << hi << "]";
    throw ConfigError(os.str());
  }
}

}  // namespace

void validate(const UpdateRuleParams& p) {
  check_interval("R", p.R, 2.0, 20.0);
  check_interval("T", p.T, 1.0, 20.0);
  check_interval("mu", p.mu, 0.0, 1.0);
  check_interval("sigma", p.sigma, 0.001, 0.3);
  for (double b : p.beta) check_interval("beta", b, 0.0, 1.0);
}

double kernel_core(double r) {
  if (r <= 0.0 || r >= 1.0) return 0.0;
  return std::exp(kCoreAlpha - kCoreAlpha / (4.0 * r * (1.0 - r)));
}

double kernel_shell(double r, const std::array<double, 3>& beta) {
  if (r < 0.0 || r >= 1.0) return 0.0;
  const double br = kRingCount * r;
  const int ring = std::min(static_cast<int>(std::floor(br)), kRingCount - 1);
  return beta[ring] * kernel_core(br - std::floor(br));
}

double growth(double u, double mu, double sigma) {
  const double d = u - mu;
  return 2.0 * std::exp(-(d * d) / (2.0 * sigma * sigma)) - 1.0;
}

KernelSpec build_kernel(const UpdateRuleParams& params, GridShape shape) {
  const double support = 2.0 * params.R + 1.0;
  if (shape.height < support || shape.width < support) {
    std::ostringstream os;
    os << "grid " << shape.height << "x" << shape.width << " smaller than kernel support " << support;
    throw ConfigError(os.str());
  }
  KernelSpec k{shape, std::vector<double>(shape.cells(), 0.0), 0.0};
  double total = 0.0;
  for (int y = 0; y < shape.height; ++y) {
    const int dy = std::min(y, shape.height - y);
    for (int x = 0; x < shape.width; ++x) {
      const int dx = std::min(x, shape.width - x);
      const double r = std::sqrt(static_cast<double>(dy * dy + dx * dx)) / params.R;
      const double v = kernel_shell(r, params.beta);
      k.values[static_cast<std::size_t>(y) * shape.width + x] = v;
      total += v;
    }
  }
  if (total > 0.0) {
    for (double& v : k.values) v /= total;
    k.sum = 1.0;
  }
  return k;
}

struct Simulator::Impl {
  GridShape shape;
  int spectrum_cols = 0;
  double* real_buf = nullptr;
  fftw_complex* spec_buf = nullptr;
  fftw_complex* kernel_spec = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  UpdateRuleParams rule;
  KernelSpec kernel;
  bool has_rule = false;

  explicit Impl(GridShape s) : shape(s), spectrum_cols(s.width / 2 + 1) {
    const std::size_t nspec = static_cast<std::size_t>(s.height) * spectrum_cols;
    real_buf = fftw_alloc_real(s.cells());
    spec_buf = fftw_alloc_complex(nspec);
    kernel_spec = fftw_alloc_complex(nspec);
    std::lock_guard lock(planner_mutex());
    // FFTW_ESTIMATE keeps the chosen algorithm, and hence rounding, identical across runs.
    forward = fftw_plan_dft_r2c_2d(s.height, s.width, real_buf, spec_buf, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(s.height, s.width, spec_buf, real_buf, FFTW_ESTIMATE);
  }

  ~Impl() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(forward);
      fftw_destroy_plan(backward);
    }
    fftw_free(real_buf);
    fftw_free(spec_buf);
    fftw_free(kernel_spec);
  }

  std::size_t spectrum_size() const { return static_cast<std::size_t>(shape.height) * spectrum_cols; }

  void load_kernel(const KernelSpec& k, const UpdateRuleParams& p) {
    if (!(k.shape == shape)) throw ConfigError("kernel built for a different grid shape");
    kernel = k;
    rule = p;
    std::copy(k.values.begin(), k.values.end(), real_buf);
    fftw_execute_dft_r2c(forward, real_buf, kernel_spec);
    has_rule = true;
  }

  // Leaves K * A in real_buf.
  void convolve_into_buffer(const Grid& state) {
    if (!has_rule) throw ConfigError("simulator has no update rule");
    if (!(state.shape() == shape)) throw ConfigError("state shape does not match simulator");
    std::copy(state.data().begin(), state.data().end(), real_buf);
    fftw_execute_dft_r2c(forward, real_buf, spec_buf);
    const double scale = 1.0 / static_cast<double>(shape.cells());
    const std::size_t n = spectrum_size();
    for (std::size_t i = 0; i < n; ++i) {
      const double ar = spec_buf[i][0], ai = spec_buf[i][1];
      const double kr = kernel_spec[i][0], ki = kernel_spec[i][1];
      spec_buf[i][0] = (ar * kr - ai * ki) * scale;
      spec_buf[i][1] = (ar * ki + ai * kr) * scale;
    }
    fftw_execute_dft_c2r(backward, spec_buf, real_buf);
  }
};

Simulator::Simulator(GridShape shape) : impl_(std::make_unique<Impl>(shape)) {}
Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;
Simulator& Simulator::operator=(Simulator&&) noexcept = default;

GridShape Simulator::shape() const { return impl_->shape; }

void Simulator::set_rule(const UpdateRuleParams& params) {
  if (impl_->has_rule && impl_->rule == params) return;
  impl_->load_kernel(build_kernel(params, impl_->shape), params);
}

void Simulator::set_kernel(const KernelSpec& kernel, const UpdateRuleParams& params) {
  impl_->load_kernel(kernel, params);
}

const UpdateRuleParams& Simulator::rule() const { return impl_->rule; }
const KernelSpec& Simulator::kernel() const { return impl_->kernel; }

Grid Simulator::convolve(const Grid& state) {
  impl_->convolve_into_buffer(state);
  return Grid(impl_->shape, std::vector<double>(impl_->real_buf, impl_->real_buf + impl_->shape.cells()));
}

Grid Simulator::step(const Grid& state, int step_index) {
  impl_->convolve_into_buffer(state);
  const UpdateRuleParams& p = impl_->rule;
  const double dt = p.dt();
  Grid next(impl_->shape);
  const auto& in = state.data();
  auto& out = next.data();
  const double* u = impl_->real_buf;
  bool fault = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = in[i] + dt * growth(u[i], p.mu, p.sigma);
    if (!std::isfinite(v)) fault = true;
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  if (fault) {
    std::ostringstream os;
    os << "non-finite activation at step " << step_index;
    throw NumericalFault(step_index, os.str());
  }
  return next;
}

Grid step(const Grid& state, const KernelSpec& kernel, const UpdateRuleParams& params) {
  Simulator sim(state.shape());
  sim.set_kernel(kernel, params);
  return sim.step(state);
}

Rollout rollout(Simulator& sim, const Grid& initial, int steps, int frame_every) {
  if (steps < 1) throw ConfigError("rollout needs at least one step");
  Rollout r;
  r.initial = initial;
  r.steps = steps;
  Grid state = initial;
  for (int t = 1; t <= steps; ++t) {
    state = sim.step(state, t);
    if (frame_every > 0 && t % frame_every == 0 && t != steps) r.frames.push_back(state);
  }
  r.final = std::move(state);
  return r;
}

Rollout rollout(const Grid& initial, const UpdateRuleParams& params, int steps, int frame_every) {
  Simulator sim(initial.shape());
  sim.set_rule(params);
  return rollout(sim, initial, steps, frame_every);
}

}  // namespace holmes::lenia
