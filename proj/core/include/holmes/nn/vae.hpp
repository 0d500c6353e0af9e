#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "holmes/rng.hpp"

namespace holmes::nn {

/// Shape of a module: stacked 4x4 stride-2 convolutions down to a 4x4 map,
/// two hidden fully-connected layers, and a diagonal Gaussian latent head.
/// The decoder mirrors the encoder with transposed convolutions.
struct Architecture {
  int grid = 256;     ///< square input side, a power of two >= 16
  int channels = 16;
  int hidden = 64;
  int latent = 16;

  /// Convolution stages: log2(grid / 4).
  int stages() const;
  /// Encoder stage (1-based) whose output feeds the child's lf_c connection.
  int encoder_tap() const { return (stages() + 1) / 2; }
  /// Decoder transposed-convolution stage (1-based) feeding lfi_c.
  int decoder_tap() const { return stages() - encoder_tap(); }
  int tap_side() const { return grid >> encoder_tap(); }
  int flat() const { return channels * 16; }

  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Named slice of the flat parameter vector; weights are (rows x cols) column-major.
struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  int fan_in = 1;
  bool bias = false;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Activations a frozen module exposes to its children, computed on the
/// posterior mean.
template <typename S>
struct Trace {
  std::vector<S> encoder_tap;  ///< tap_side^2 x channels
  std::vector<S> decoder_fc1;  ///< hidden
  std::vector<S> decoder_tap;  ///< tap_side^2 x channels
  std::vector<S> recon;        ///< grid^2, sigmoid of the logits
  std::vector<S> mean;         ///< latent
  bool empty() const { return mean.empty(); }
};

template <typename S>
struct LossTerms {
  S total = 0;
  S reconstruction = 0;
  S kl = 0;
};

/// Per-sample cached forward pass, reused by backward.
template <typename S>
struct ForwardCache;

/// Variational auto-encoder with optional lateral connections from a parent.
///
/// Parameters live in one flat vector so optimizers, checkpoints and
/// finite-difference checks can treat them uniformly.
template <typename S>
class VaeModel {
 public:
  VaeModel(Architecture arch, bool with_connections);

  const Architecture& architecture() const { return arch_; }
  bool has_connections() const { return with_connections_; }

  std::span<S> parameters() { return params_; }
  std::span<const S> parameters() const { return params_; }
  std::span<S> gradients() { return grads_; }
  std::span<const S> gradients() const { return grads_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t parameter_count() const { return params_.size(); }
  const ParamBlock& block(const std::string& name) const;

  /// Uniform(-sqrt(6 / fan_in), +sqrt(6 / fan_in)) weights, zero biases.
  void initialize(Rng& rng);
  void zero_gradients();

  /// Posterior mean of one grid (grid^2 values in [0, 1]). When `trace` is
  /// non-null it receives the activations this module exposes to children.
  std::vector<S> encode(std::span<const S> image, const Trace<S>* parent, Trace<S>* trace = nullptr) const;

  /// Loss of one sample with z = mean + exp(logvar / 2) * eps. When
  /// `accumulate` is true the gradient, scaled by `grad_scale`, is added to
  /// gradients(). `logits_out`, if given, receives the decoder logits.
  LossTerms<S> loss(std::span<const S> image, std::span<const S> eps, const Trace<S>* parent, bool accumulate,
                    S grad_scale = S(1), std::vector<S>* logits_out = nullptr);

  /// Reconstruction logits decoded from a latent vector.
  std::vector<S> decode(std::span<const S> z, const Trace<S>* parent) const;

 private:
  void forward(std::span<const S> image, std::span<const S> eps, bool use_mean, const Trace<S>* parent,
               ForwardCache<S>& cache) const;
  void forward_decoder(const Trace<S>* parent, ForwardCache<S>& cache) const;
  void backward(std::span<const S> image, const Trace<S>* parent, const ForwardCache<S>& cache, S scale);
  std::size_t add_block(const std::string& name, int rows, int cols, int fan_in, bool bias);

  Architecture arch_;
  bool with_connections_;
  std::vector<ParamBlock> blocks_;
  std::vector<S> params_;
  std::vector<S> grads_;

  struct Layout;
  std::shared_ptr<const Layout> layout_;
};

extern template class VaeModel<float>;
extern template class VaeModel<double>;

/// Binary cross-entropy of sigmoid(logit) against target, numerically stable.
double bce_with_logits(double logit, double target);

/// KL(N(mean, exp(logvar)) || N(0, I)).
double gaussian_kl(std::span<const double> mean, std::span<const double> logvar);

}  // namespace holmes::nn
