#pragma once

#include <array>
#include <complex>
#include <memory>
#include <vector>

#include "holmes/grid.hpp"

namespace holmes::lenia {

/// Update-rule half of the controllable parameters.
struct UpdateRuleParams {
  double R = 10.0;      ///< kernel radius in cells, [2, 20]
  double T = 10.0;      ///< time resolution, [1, 20]; the step size is 1/T
  double mu = 0.15;     ///< growth center, [0, 1]
  double sigma = 0.015; ///< growth width, [0.001, 0.3]
  std::array<double, 3> beta{1.0, 1.0, 1.0};  ///< ring weights, [0, 1]

  double dt() const { return 1.0 / T; }
  friend bool operator==(const UpdateRuleParams&, const UpdateRuleParams&) = default;
};

/// Throws ConfigError when a field is outside its admissible interval.
void validate(const UpdateRuleParams& p);

inline constexpr double kCoreAlpha = 4.0;
inline constexpr int kRingCount = 3;

/// Kernel core exp(alpha - alpha / (4 r (1 - r))); zero at r <= 0 and r >= 1.
double kernel_core(double r);

/// Concentric-ring shell evaluated at normalized distance r = dist / R.
double kernel_shell(double r, const std::array<double, 3>& beta);

/// Growth mapping 2 exp(-(u - mu)^2 / (2 sigma^2)) - 1.
double growth(double u, double mu, double sigma);

/// Normalized convolution kernel laid out on the grid with its center at
/// index (0, 0) and wraparound offsets.
struct KernelSpec {
  GridShape shape;
  std::vector<double> values;
  double sum = 0.0;  ///< 1 after normalization, 0 for an all-zero shell
};

/// Sampled at cell centers. Throws ConfigError when the grid cannot hold the
/// kernel support (any dimension < 2R + 1).
KernelSpec build_kernel(const UpdateRuleParams& params, GridShape shape);

/// Circular convolution K * A through real-to-complex FFTs.
///
/// Owns FFT plans and work buffers for a single grid shape; one instance
/// must not be used from two threads at once. The kernel spectrum is cached
/// until set_rule is called with different parameters.
class Simulator {
 public:
  explicit Simulator(GridShape shape);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;
  Simulator(Simulator&&) noexcept;
  Simulator& operator=(Simulator&&) noexcept;

  GridShape shape() const;

  void set_rule(const UpdateRuleParams& params);
  void set_kernel(const KernelSpec& kernel, const UpdateRuleParams& params);
  const UpdateRuleParams& rule() const;
  const KernelSpec& kernel() const;

  /// Potential field K * A.
  Grid convolve(const Grid& state);

  /// clip(A + dt * G(K * A), 0, 1). Throws NumericalFault(step_index) on NaN/Inf.
  Grid step(const Grid& state, int step_index = 1);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct Rollout {
  Grid initial;
  Grid final;
  int steps = 0;
  std::vector<Grid> frames;  ///< every frame_every-th intermediate state, when requested
};

/// Single update on a fresh simulator.
Grid step(const Grid& state, const KernelSpec& kernel, const UpdateRuleParams& params);

/// Applies step `steps` times. frame_every = 0 keeps no intermediate frames.
Rollout rollout(const Grid& initial, const UpdateRuleParams& params, int steps, int frame_every = 0);
Rollout rollout(Simulator& sim, const Grid& initial, int steps, int frame_every = 0);

}  // namespace holmes::lenia
