#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "holmes/grid.hpp"
#include "holmes/nn/vae.hpp"
#include "holmes/rng.hpp"

namespace holmes {

/// Online data augmentation applied to training samples.
struct AugmentConfig {
  double translate_prob = 0.6;  ///< toroidal shift up to half the grid in each axis
  double flip_h_prob = 0.2;
  double flip_v_prob = 0.2;
  double rotate_prob = 0.0;     ///< optional, bilinear on the torus
  double max_rotation_deg = 20.0;
  double zoom_prob = 0.0;       ///< optional, bilinear zoom-in about the center
  double max_zoom = 3.0;

  static AugmentConfig none() { return {0.0, 0.0, 0.0, 0.0, 20.0, 0.0, 3.0}; }
};

/// Random toroidal translation / flips (and optional rotation / zoom). Output stays in [0, 1].
Grid augment(const Grid& o, Rng& rng, const AugmentConfig& config = {});

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;  ///< L2 term added to the gradient
};

/// Adaptive-moment optimizer state over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t size) : m_(size, 0.0f), v_(size, 0.0f) {}

  void step(std::span<float> params, std::span<const float> grads, const AdamConfig& config);

  std::uint64_t steps() const { return t_; }
  const std::vector<float>& first_moment() const { return m_; }
  const std::vector<float>& second_moment() const { return v_; }
  void restore(std::uint64_t t, std::vector<float> m, std::vector<float> v);

 private:
  std::uint64_t t_ = 0;
  std::vector<float> m_, v_;
};

/// The trainable base module of the hierarchy: a VAE, its optimizer state
/// and its training record.
class EmbeddingModule {
 public:
  EmbeddingModule(nn::Architecture arch, bool with_connections, Rng& init_rng);

  const nn::Architecture& architecture() const { return model_.architecture(); }
  bool has_connections() const { return model_.has_connections(); }
  int latent_dim() const { return model_.architecture().latent; }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  int train_epochs() const { return train_epochs_; }
  const std::vector<double>& loss_history() const { return loss_history_; }

  /// Posterior mean; `trace` receives the activations used by children.
  std::vector<double> encode(const Grid& o, const nn::Trace<float>* parent, nn::Trace<float>* trace = nullptr) const;

  nn::VaeModel<float>& model() { return model_; }
  const nn::VaeModel<float>& model() const { return model_; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }

  /// Bookkeeping used by training and checkpoint restore.
  void record_epoch(double reconstruction_loss);
  void restore_record(int epochs, std::vector<double> history, bool frozen);

 private:
  nn::VaeModel<float> model_;
  Adam adam_;
  bool frozen_ = false;
  int train_epochs_ = 0;
  std::vector<double> loss_history_;
};

/// Frozen ancestors from the root down to the parent of the module being
/// evaluated; yields the parent trace for a grid.
nn::Trace<float> ancestor_trace(std::span<const EmbeddingModule* const> chain, const Grid& o);

struct TrainSample {
  const Grid* grid = nullptr;
  bool is_new = false;  ///< discovered since the previous training stage
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;
  double new_fraction = 0.3;
  AugmentConfig augment;
  AdamConfig adam;
};

struct TrainReport {
  bool skipped = false;
  std::string warning;
  std::vector<double> epoch_losses;  ///< mean per-image reconstruction loss
};

/// Indices of one epoch's dataset: X draws with replacement, a `new_fraction`
/// share from the new stratum and the rest from the old one. Degenerates to
/// uniform draws over all samples when either stratum is empty.
std::vector<std::size_t> importance_sample(std::span<const TrainSample> samples, double new_fraction, Rng& rng);

/// Runs `config.epochs` epochs of minibatch Adam on the unfrozen module.
/// An empty sample set is a no-op reported as skipped.
TrainReport train_stage(EmbeddingModule& module, std::span<const EmbeddingModule* const> ancestors,
                        std::span<const TrainSample> samples, const TrainConfig& config, Rng& rng);

/// Binary checkpoint: shape manifest, little-endian f32 parameters, Adam state, training record.
void save_module(const EmbeddingModule& module, std::ostream& os);
std::unique_ptr<EmbeddingModule> load_module(std::istream& is);

}  // namespace holmes
