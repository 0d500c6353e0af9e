#include "holmes/embedding.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include "holmes/binary_io.hpp"
#include "holmes/errors.hpp"

namespace holmes {

namespace {

double bilinear_wrapped(const Grid& g, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * ((1 - fx) * g.wrapped(y0, x0) + fx * g.wrapped(y0, x0 + 1)) +
         fy * ((1 - fx) * g.wrapped(y0 + 1, x0) + fx * g.wrapped(y0 + 1, x0 + 1));
}

// Inverse-maps every output cell through a similarity about the grid center.
Grid resample(const Grid& g, double angle, double zoom) {
  Grid out(g.shape());
  const double cy = 0.5 * (g.height() - 1), cx = 0.5 * (g.width() - 1);
  const double c = std::cos(angle) / zoom, s = std::sin(angle) / zoom;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      const double dy = y - cy, dx = x - cx;
      const double v = bilinear_wrapped(g, cy + c * dy - s * dx, cx + s * dy + c * dx);
      out.at(y, x) = std::clamp(v, 0.0, 1.0);
    }
  return out;
}

}  // namespace

Grid augment(const Grid& o, Rng& rng, const AugmentConfig& cfg) {
  Grid g = o;
  if (rng.bernoulli(cfg.translate_prob)) {
    const int dy = static_cast<int>(rng.integer(-o.height() / 2, o.height() / 2));
    const int dx = static_cast<int>(rng.integer(-o.width() / 2, o.width() / 2));
    g = roll(g, dy, dx);
  }
  const bool rotate = rng.bernoulli(cfg.rotate_prob);
  const double angle = rotate ? rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg) * std::numbers::pi / 180.0 : 0.0;
  const bool zoom = rng.bernoulli(cfg.zoom_prob);
  const double factor = zoom ? rng.uniform(1.0, cfg.max_zoom) : 1.0;
  if (rotate || zoom) g = resample(g, angle, factor);
  if (rng.bernoulli(cfg.flip_h_prob)) g = flip_horizontal(g);
  if (rng.bernoulli(cfg.flip_v_prob)) g = flip_vertical(g);
  return g;
}

void Adam::step(std::span<float> params, std::span<const float> grads, const AdamConfig& cfg) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0f);
    v_.assign(params.size(), 0.0f);
  }
  ++t_;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const float lr = static_cast<float>(cfg.learning_rate / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(cfg.epsilon), wd = static_cast<float>(cfg.weight_decay);
  const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i] + wd * params[i];
    m_[i] = fb1 * m_[i] + (1.0f - fb1) * g;
    v_[i] = fb2 * v_[i] + (1.0f - fb2) * g * g;
    params[i] -= lr * m_[i] / (std::sqrt(v_[i] * inv_c2) + eps);
  }
}

void Adam::restore(std::uint64_t t, std::vector<float> m, std::vector<float> v) {
  if (m.size() != v.size()) throw ValidationError("optimizer moments differ in size");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

EmbeddingModule::EmbeddingModule(nn::Architecture arch, bool with_connections, Rng& init_rng)
    : model_(arch, with_connections), adam_(model_.parameter_count()) {
  model_.initialize(init_rng);
}

namespace {

std::vector<float> to_float(const Grid& o) {
  std::vector<float> out(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) out[i] = static_cast<float>(o.data()[i]);
  return out;
}

}  // namespace

std::vector<double> EmbeddingModule::encode(const Grid& o, const nn::Trace<float>* parent,
                                            nn::Trace<float>* trace) const {
  const auto image = to_float(o);
  const auto mean = model_.encode(image, parent, trace);
  return std::vector<double>(mean.begin(), mean.end());
}

void EmbeddingModule::record_epoch(double reconstruction_loss) {
  ++train_epochs_;
  loss_history_.push_back(reconstruction_loss);
}

void EmbeddingModule::restore_record(int epochs, std::vector<double> history, bool frozen) {
  train_epochs_ = epochs;
  loss_history_ = std::move(history);
  frozen_ = frozen;
}

nn::Trace<float> ancestor_trace(std::span<const EmbeddingModule* const> chain, const Grid& o) {
  nn::Trace<float> trace;
  if (chain.empty()) return trace;
  const auto image = to_float(o);
  for (const EmbeddingModule* m : chain) {
    nn::Trace<float> next;
    m->model().encode(image, trace.empty() ? nullptr : &trace, &next);
    trace = std::move(next);
  }
  return trace;
}

std::vector<std::size_t> importance_sample(std::span<const TrainSample> samples, double new_fraction, Rng& rng) {
  std::vector<std::size_t> fresh, old;
  for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].is_new ? fresh : old).push_back(i);
  const std::size_t x = samples.size();
  std::vector<std::size_t> out;
  out.reserve(x);
  if (fresh.empty() || old.empty()) {
    for (std::size_t k = 0; k < x; ++k) out.push_back(rng.index(x));
    return out;
  }
  const auto n_new = static_cast<std::size_t>(std::llround(new_fraction * static_cast<double>(x)));
  for (std::size_t k = 0; k < n_new; ++k) out.push_back(fresh[rng.index(fresh.size())]);
  for (std::size_t k = n_new; k < x; ++k) out.push_back(old[rng.index(old.size())]);
  // Interleave the strata across minibatches.
  for (std::size_t k = out.size(); k > 1; --k) std::swap(out[k - 1], out[rng.index(k)]);
  return out;
}

TrainReport train_stage(EmbeddingModule& module, std::span<const EmbeddingModule* const> ancestors,
                        std::span<const TrainSample> samples, const TrainConfig& config, Rng& rng) {
  if (module.frozen()) throw ConfigError("cannot train a frozen module");
  if (module.has_connections() == ancestors.empty())
    throw ConfigError("ancestor chain does not match the module's connections");
  TrainReport report;
  if (samples.empty()) {
    report.skipped = true;
    report.warning = "no patterns routed to the module; training skipped";
    return report;
  }
  if (config.epochs <= 0) return report;

  auto& model = module.model();
  const int latent = model.architecture().latent;
  const std::size_t batch = static_cast<std::size_t>(std::max(1, config.batch_size));
  std::vector<float> eps(static_cast<std::size_t>(latent));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = importance_sample(samples, config.new_fraction, rng);
    double recon_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const float scale = 1.0f / static_cast<float>(end - start);
      model.zero_gradients();
      for (std::size_t k = start; k < end; ++k) {
        const Grid g = augment(*samples[order[k]].grid, rng, config.augment);
        for (float& e : eps) e = static_cast<float>(rng.normal());
        const nn::Trace<float> parent = ancestor_trace(ancestors, g);
        const auto image = to_float(g);
        const auto terms = model.loss(image, eps, parent.empty() ? nullptr : &parent, true, scale);
        recon_sum += terms.reconstruction;
      }
      module.optimizer().step(model.parameters(), model.gradients(), config.adam);
    }
    const double epoch_loss = recon_sum / static_cast<double>(order.size());
    module.record_epoch(epoch_loss);
    report.epoch_losses.push_back(epoch_loss);
  }
  return report;
}

void save_module(const EmbeddingModule& module, std::ostream& os) {
  const auto& model = module.model();
  const auto& a = model.architecture();
  io::write_magic(os, "HMOD");
  io::write_u32(os, 1);
  for (int v : {a.grid, a.channels, a.hidden, a.latent}) io::write_u32(os, static_cast<std::uint32_t>(v));
  io::write_u32(os, module.has_connections() ? 1 : 0);
  io::write_u32(os, module.frozen() ? 1 : 0);
  io::write_u32(os, static_cast<std::uint32_t>(module.train_epochs()));
  io::write_u64(os, module.loss_history().size());
  for (double v : module.loss_history()) io::write_f64(os, v);
  io::write_u32(os, static_cast<std::uint32_t>(model.blocks().size()));
  for (const auto& b : model.blocks()) {
    io::write_string(os, b.name);
    io::write_u32(os, static_cast<std::uint32_t>(b.rows));
    io::write_u32(os, static_cast<std::uint32_t>(b.cols));
  }
  io::write_f32s(os, model.parameters());
  const Adam& adam = module.optimizer();
  io::write_u64(os, adam.steps());
  const bool has_moments = adam.first_moment().size() == model.parameter_count();
  io::write_u32(os, has_moments ? 1 : 0);
  if (has_moments) {
    io::write_f32s(os, adam.first_moment());
    io::write_f32s(os, adam.second_moment());
  }
  if (!os) throw IntegrityError("failed writing module checkpoint");
}

std::unique_ptr<EmbeddingModule> load_module(std::istream& is) {
  io::expect_magic(is, "HMOD");
  if (io::read_u32(is) != 1) throw ValidationError("unsupported module checkpoint version");
  nn::Architecture a;
  a.grid = static_cast<int>(io::read_u32(is));
  a.channels = static_cast<int>(io::read_u32(is));
  a.hidden = static_cast<int>(io::read_u32(is));
  a.latent = static_cast<int>(io::read_u32(is));
  const bool connections = io::read_u32(is) != 0;
  const bool frozen = io::read_u32(is) != 0;
  const int epochs = static_cast<int>(io::read_u32(is));
  std::vector<double> history(io::read_u64(is));
  for (double& v : history) v = io::read_f64(is);
  Rng unused(0);
  auto module = std::make_unique<EmbeddingModule>(a, connections, unused);
  auto& model = module->model();
  const std::uint32_t blocks = io::read_u32(is);
  if (blocks != model.blocks().size()) throw ValidationError("module checkpoint has an unexpected layer count");
  for (const auto& b : model.blocks()) {
    const std::string name = io::read_string(is);
    const auto rows = static_cast<int>(io::read_u32(is));
    const auto cols = static_cast<int>(io::read_u32(is));
    if (name != b.name || rows != b.rows || cols != b.cols)
      throw ValidationError("module checkpoint layer mismatch at " + name);
  }
  io::read_f32s(is, model.parameters());
  const std::uint64_t steps = io::read_u64(is);
  std::vector<float> m, v;
  if (io::read_u32(is) != 0) {
    m.resize(model.parameter_count());
    v.resize(model.parameter_count());
    io::read_f32s(is, m);
    io::read_f32s(is, v);
  } else {
    m.assign(model.parameter_count(), 0.0f);
    v.assign(model.parameter_count(), 0.0f);
  }
  module->optimizer().restore(steps, std::move(m), std::move(v));
  module->restore_record(epochs, std::move(history), frozen);
  return module;
}

}  // namespace holmes
