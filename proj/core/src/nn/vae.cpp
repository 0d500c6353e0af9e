#include "holmes/nn/vae.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "conv_ops.hpp"
#include "holmes/errors.hpp"

namespace holmes::nn {

using namespace detail;

int Architecture::stages() const {
  int n = 0;
  for (int side = grid; side > 4; side /= 2) ++n;
  return n;
}

void Architecture::validate() const {
  if (grid < 16 || !std::has_single_bit(static_cast<unsigned>(grid)))
    throw ConfigError("module grid side must be a power of two >= 16, got " + std::to_string(grid));
  if (channels < 1 || hidden < 1 || latent < 1) throw ConfigError("module widths must be positive");
}

double bce_with_logits(double logit, double target) {
  return std::max(logit, 0.0) - target * logit + std::log1p(std::exp(-std::abs(logit)));
}

double gaussian_kl(std::span<const double> mean, std::span<const double> logvar) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i)
    kl += -0.5 * (1.0 + logvar[i] - mean[i] * mean[i] - std::exp(logvar[i]));
  return kl;
}

template <typename S>
struct VaeModel<S>::Layout {
  std::vector<std::size_t> enc_w, enc_b, dec_w, dec_b;
  std::size_t fc1_w, fc1_b, fc2_w, fc2_b, head_w, head_b;
  std::size_t dfc1_w, dfc1_b, dfc2_w, dfc2_b, dfc3_w, dfc3_b;
  std::size_t lf_w = 0, lf_b = 0, gfi_w = 0, gfi_b = 0, lfi_w = 0, lfi_b = 0, rc_w = 0, rc_b = 0;
};

template <typename S>
struct ForwardCache {
  std::vector<Mat<S>> enc_pre, enc_act;  // enc_act[0] is the image
  Vec<S> flat, h1_pre, h1, h2_pre, h2, mean, logvar, eps, z;
  Vec<S> d1_pre, gfi_pre, d1, d2_pre, d2, d3_pre, d3;
  std::vector<Mat<S>> dec_pre, dec_act;  // dec_act[0] is the reshaped fc output
  Mat<S> logits;
  bool sampled = false;
};

template <typename S>
std::size_t VaeModel<S>::add_block(const std::string& name, int rows, int cols, int fan_in, bool bias) {
  ParamBlock b{name, rows, cols, params_.size(), fan_in, bias};
  params_.resize(params_.size() + b.size(), S(0));
  blocks_.push_back(b);
  return b.offset;
}

template <typename S>
VaeModel<S>::VaeModel(Architecture arch, bool with_connections)
    : arch_(arch), with_connections_(with_connections) {
  arch_.validate();
  auto layout = std::make_shared<Layout>();
  const int n = arch_.stages();
  const int c = arch_.channels, h = arch_.hidden, l = arch_.latent;
  for (int i = 1; i <= n; ++i) {
    const int cin = i == 1 ? 1 : c;
    const std::string p = "encoder.conv" + std::to_string(i);
    layout->enc_w.push_back(add_block(p + ".weight", c, cin * kTaps, cin * kTaps, false));
    layout->enc_b.push_back(add_block(p + ".bias", c, 1, cin * kTaps, true));
  }
  layout->fc1_w = add_block("encoder.fc1.weight", h, arch_.flat(), arch_.flat(), false);
  layout->fc1_b = add_block("encoder.fc1.bias", h, 1, arch_.flat(), true);
  layout->fc2_w = add_block("encoder.fc2.weight", h, h, h, false);
  layout->fc2_b = add_block("encoder.fc2.bias", h, 1, h, true);
  layout->head_w = add_block("encoder.head.weight", 2 * l, h, h, false);
  layout->head_b = add_block("encoder.head.bias", 2 * l, 1, h, true);
  layout->dfc1_w = add_block("decoder.fc1.weight", h, l, l, false);
  layout->dfc1_b = add_block("decoder.fc1.bias", h, 1, l, true);
  layout->dfc2_w = add_block("decoder.fc2.weight", h, h, h, false);
  layout->dfc2_b = add_block("decoder.fc2.bias", h, 1, h, true);
  layout->dfc3_w = add_block("decoder.fc3.weight", arch_.flat(), h, h, false);
  layout->dfc3_b = add_block("decoder.fc3.bias", arch_.flat(), 1, h, true);
  for (int j = 1; j <= n; ++j) {
    const int cout = j == n ? 1 : c;
    const std::string p = "decoder.deconv" + std::to_string(j);
    // Each output cell of a stride-2 transposed convolution sees a quarter of the taps.
    layout->dec_w.push_back(add_block(p + ".weight", c, cout * kTaps, c * kTaps / 4, false));
    layout->dec_b.push_back(add_block(p + ".bias", cout, 1, c * kTaps / 4, true));
  }
  if (with_connections_) {
    layout->lf_w = add_block("connection.lf.weight", c, c, c, false);
    layout->lf_b = add_block("connection.lf.bias", c, 1, c, true);
    layout->gfi_w = add_block("connection.gfi.weight", h, h, h, false);
    layout->gfi_b = add_block("connection.gfi.bias", h, 1, h, true);
    layout->lfi_w = add_block("connection.lfi.weight", c, c, c, false);
    layout->lfi_b = add_block("connection.lfi.bias", c, 1, c, true);
    layout->rc_w = add_block("connection.recon.weight", 1, 1, 1, false);
    layout->rc_b = add_block("connection.recon.bias", 1, 1, 1, true);
  }
  grads_.assign(params_.size(), S(0));
  layout_ = std::move(layout);
}

template <typename S>
const ParamBlock& VaeModel<S>::block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw ConfigError("no parameter block named " + name);
}

template <typename S>
void VaeModel<S>::initialize(Rng& rng) {
  for (const auto& b : blocks_) {
    const double bound = std::sqrt(6.0 / b.fan_in);
    for (std::size_t i = 0; i < b.size(); ++i)
      params_[b.offset + i] = b.bias ? S(0) : static_cast<S>(rng.uniform(-bound, bound));
  }
}

template <typename S>
void VaeModel<S>::zero_gradients() {
  std::fill(grads_.begin(), grads_.end(), S(0));
}

namespace {

template <typename S>
CMapMat<S> view(const std::vector<S>& p, std::size_t off, int rows, int cols) {
  return CMapMat<S>(p.data() + off, rows, cols);
}

template <typename S>
MapMat<S> view(std::vector<S>& p, std::size_t off, int rows, int cols) {
  return MapMat<S>(p.data() + off, rows, cols);
}

template <typename S>
Eigen::Map<const Vec<S>> vview(const std::vector<S>& p, std::size_t off, int n) {
  return Eigen::Map<const Vec<S>>(p.data() + off, n);
}

template <typename S>
Eigen::Map<Vec<S>> vview(std::vector<S>& p, std::size_t off, int n) {
  return Eigen::Map<Vec<S>>(p.data() + off, n);
}

template <typename S>
void check_trace(const Trace<S>& t, const Architecture& a) {
  const auto tap = static_cast<std::size_t>(a.tap_side()) * a.tap_side() * a.channels;
  if (t.encoder_tap.size() != tap || t.decoder_tap.size() != tap ||
      t.decoder_fc1.size() != static_cast<std::size_t>(a.hidden) ||
      t.recon.size() != static_cast<std::size_t>(a.grid) * a.grid)
    throw ConfigError("parent trace does not match the module architecture");
}

}  // namespace

template <typename S>
void VaeModel<S>::forward(std::span<const S> image, std::span<const S> eps, bool use_mean, const Trace<S>* parent,
                          ForwardCache<S>& fc) const {
  const Layout& L = *layout_;
  const int n = arch_.stages();
  const int c = arch_.channels, h = arch_.hidden, l = arch_.latent, N = arch_.grid;
  if (image.size() != static_cast<std::size_t>(N) * N)
    throw ConfigError("module expects a " + std::to_string(N) + "x" + std::to_string(N) + " grid");
  const bool connect = with_connections_ && parent != nullptr;
  if (with_connections_ && parent == nullptr) throw ConfigError("module with connections needs a parent trace");
  if (connect) check_trace(*parent, arch_);
  const int tap = arch_.encoder_tap();
  const int tap_pixels = arch_.tap_side() * arch_.tap_side();

  fc.enc_act.resize(n + 1);
  fc.enc_pre.resize(n + 1);
  fc.enc_act[0] = CMapMat<S>(image.data(), N * N, 1);
  Mat<S> col;
  for (int i = 1; i <= n; ++i) {
    const int in_side = N >> (i - 1);
    const int cin = i == 1 ? 1 : c;
    im2col<S>(fc.enc_act[i - 1], in_side, col);
    Mat<S>& pre = fc.enc_pre[i];
    pre.noalias() = col * view(params_, L.enc_w[i - 1], c, cin * kTaps).transpose();
    pre.rowwise() += vview(params_, L.enc_b[i - 1], c).transpose();
    fc.enc_act[i] = pre.cwiseMax(S(0));
    if (connect && i == tap) {
      const CMapMat<S> p(parent->encoder_tap.data(), tap_pixels, c);
      fc.enc_act[i].noalias() += p * view(params_, L.lf_w, c, c).transpose();
      fc.enc_act[i].rowwise() += vview(params_, L.lf_b, c).transpose();
    }
  }
  fc.flat = Eigen::Map<const Vec<S>>(fc.enc_act[n].data(), arch_.flat());
  fc.h1_pre = view(params_, L.fc1_w, h, arch_.flat()) * fc.flat + vview(params_, L.fc1_b, h);
  fc.h1 = fc.h1_pre.cwiseMax(S(0));
  fc.h2_pre = view(params_, L.fc2_w, h, h) * fc.h1 + vview(params_, L.fc2_b, h);
  fc.h2 = fc.h2_pre.cwiseMax(S(0));
  const Vec<S> head = view(params_, L.head_w, 2 * l, h) * fc.h2 + vview(params_, L.head_b, 2 * l);
  fc.mean = head.head(l);
  fc.logvar = head.tail(l);
  fc.sampled = !use_mean;
  if (use_mean) {
    fc.z = fc.mean;
  } else {
    if (eps.size() != static_cast<std::size_t>(l)) throw ConfigError("noise vector must match the latent size");
    fc.eps = Eigen::Map<const Vec<S>>(eps.data(), l);
    fc.z = fc.mean.array() + (S(0.5) * fc.logvar.array()).exp() * fc.eps.array();
  }
}

template <typename S>
void VaeModel<S>::forward_decoder(const Trace<S>* parent, ForwardCache<S>& fc) const {
  const Layout& L = *layout_;
  const int n = arch_.stages();
  const int c = arch_.channels, h = arch_.hidden, l = arch_.latent;
  const bool connect = with_connections_ && parent != nullptr;
  const int tap_pixels = arch_.tap_side() * arch_.tap_side();
  fc.d1_pre = view(params_, L.dfc1_w, h, l) * fc.z + vview(params_, L.dfc1_b, h);
  fc.d1 = fc.d1_pre.cwiseMax(S(0));
  if (connect) {
    fc.gfi_pre = view(params_, L.gfi_w, h, h) * vview(parent->decoder_fc1, 0, h) + vview(params_, L.gfi_b, h);
    fc.d1 += fc.gfi_pre.cwiseMax(S(0));
  }
  fc.d2_pre = view(params_, L.dfc2_w, h, h) * fc.d1 + vview(params_, L.dfc2_b, h);
  fc.d2 = fc.d2_pre.cwiseMax(S(0));
  fc.d3_pre = view(params_, L.dfc3_w, arch_.flat(), h) * fc.d2 + vview(params_, L.dfc3_b, arch_.flat());
  fc.d3 = fc.d3_pre.cwiseMax(S(0));
  fc.dec_act.resize(n + 1);
  fc.dec_pre.resize(n + 1);
  fc.dec_act[0] = CMapMat<S>(fc.d3.data(), 16, c);
  Mat<S> p;
  for (int j = 1; j <= n; ++j) {
    const int out_side = 8 << (j - 1);
    const int cout = j == n ? 1 : c;
    p.noalias() = fc.dec_act[j - 1] * view(params_, L.dec_w[j - 1], c, cout * kTaps);
    Mat<S>& out = fc.dec_pre[j];
    col2im<S>(p, out_side, cout, out);
    out.rowwise() += vview(params_, L.dec_b[j - 1], cout).transpose();
    if (j < n) {
      fc.dec_act[j] = out.cwiseMax(S(0));
      if (connect && j == arch_.decoder_tap()) {
        const CMapMat<S> pd(parent->decoder_tap.data(), tap_pixels, c);
        fc.dec_act[j].noalias() += pd * view(params_, L.lfi_w, c, c).transpose();
        fc.dec_act[j].rowwise() += vview(params_, L.lfi_b, c).transpose();
      }
    }
  }
  fc.logits = fc.dec_pre[n];
  if (connect) {
    const S w = params_[L.rc_w], b = params_[L.rc_b];
    for (Eigen::Index k = 0; k < fc.logits.size(); ++k) fc.logits.data()[k] += w * parent->recon[k] + b;
  }
}

template <typename S>
std::vector<S> VaeModel<S>::encode(std::span<const S> image, const Trace<S>* parent, Trace<S>* trace) const {
  ForwardCache<S> fc;
  forward(image, {}, true, parent, fc);
  std::vector<S> mean(fc.mean.data(), fc.mean.data() + fc.mean.size());
  if (trace == nullptr) return mean;
  forward_decoder(parent, fc);
  const Mat<S>& enc = fc.enc_act[arch_.encoder_tap()];
  const Mat<S>& dec = fc.dec_act[arch_.decoder_tap()];
  trace->encoder_tap.assign(enc.data(), enc.data() + enc.size());
  trace->decoder_fc1.assign(fc.d1.data(), fc.d1.data() + fc.d1.size());
  trace->decoder_tap.assign(dec.data(), dec.data() + dec.size());
  trace->recon.resize(fc.logits.size());
  for (Eigen::Index k = 0; k < fc.logits.size(); ++k) trace->recon[k] = S(1) / (S(1) + std::exp(-fc.logits.data()[k]));
  trace->mean = mean;
  return mean;
}

template <typename S>
std::vector<S> VaeModel<S>::decode(std::span<const S> z, const Trace<S>* parent) const {
  if (z.size() != static_cast<std::size_t>(arch_.latent)) throw ConfigError("latent vector has the wrong size");
  if (with_connections_ && parent == nullptr) throw ConfigError("module with connections needs a parent trace");
  if (with_connections_) check_trace(*parent, arch_);
  ForwardCache<S> fc;
  fc.z = Eigen::Map<const Vec<S>>(z.data(), arch_.latent);
  forward_decoder(parent, fc);
  return std::vector<S>(fc.logits.data(), fc.logits.data() + fc.logits.size());
}

template <typename S>
LossTerms<S> VaeModel<S>::loss(std::span<const S> image, std::span<const S> eps, const Trace<S>* parent,
                               bool accumulate, S grad_scale, std::vector<S>* logits_out) {
  ForwardCache<S> fc;
  forward(image, eps, false, parent, fc);
  forward_decoder(parent, fc);
  const int l = arch_.latent;

  LossTerms<S> terms;
  double recon = 0.0;
  for (Eigen::Index k = 0; k < fc.logits.size(); ++k) {
    const double x = static_cast<double>(fc.logits.data()[k]);
    const double t = static_cast<double>(image[k]);
    recon += std::max(x, 0.0) - t * x + std::log1p(std::exp(-std::abs(x)));
  }
  double kl = 0.0;
  for (int i = 0; i < l; ++i) {
    const double m = fc.mean[i], lv = fc.logvar[i];
    kl += -0.5 * (1.0 + lv - m * m - std::exp(lv));
  }
  terms.reconstruction = static_cast<S>(recon);
  terms.kl = static_cast<S>(kl);
  terms.total = static_cast<S>(recon + kl);
  if (logits_out) logits_out->assign(fc.logits.data(), fc.logits.data() + fc.logits.size());
  if (accumulate) backward(image, parent, fc, grad_scale);
  return terms;
}

template <typename S>
void VaeModel<S>::backward(std::span<const S> image, const Trace<S>* parent, const ForwardCache<S>& fc, S scale) {
  const Layout& L = *layout_;
  const int n = arch_.stages();
  const int c = arch_.channels, h = arch_.hidden, l = arch_.latent, N = arch_.grid;
  const bool connect = with_connections_ && parent != nullptr;
  const int tap_pixels = arch_.tap_side() * arch_.tap_side();
  auto& G = grads_;

  // d(BCE)/d(logit) = sigmoid(logit) - target.
  Mat<S> d_out(N * N, 1);
  for (Eigen::Index k = 0; k < d_out.size(); ++k)
    d_out.data()[k] = scale * (S(1) / (S(1) + std::exp(-fc.logits.data()[k])) - image[k]);
  if (connect) {
    S gw = 0, gb = 0;
    for (Eigen::Index k = 0; k < d_out.size(); ++k) {
      gw += d_out.data()[k] * parent->recon[k];
      gb += d_out.data()[k];
    }
    G[L.rc_w] += gw;
    G[L.rc_b] += gb;
  }

  Mat<S> d_act, dp;
  for (int j = n; j >= 1; --j) {
    const int out_side = 8 << (j - 1);
    const int cout = j == n ? 1 : c;
    if (j < n) {
      if (connect && j == arch_.decoder_tap()) {
        const CMapMat<S> pd(parent->decoder_tap.data(), tap_pixels, c);
        view(G, L.lfi_w, c, c).noalias() += d_out.transpose() * pd;
        vview(G, L.lfi_b, c) += d_out.colwise().sum().transpose();
      }
      relu_backward<S>(fc.dec_pre[j], d_out);
    }
    vview(G, L.dec_b[j - 1], cout) += d_out.colwise().sum().transpose();
    im2col<S>(d_out, out_side, dp);
    view(G, L.dec_w[j - 1], c, cout * kTaps).noalias() += fc.dec_act[j - 1].transpose() * dp;
    d_act.noalias() = dp * view(params_, L.dec_w[j - 1], c, cout * kTaps).transpose();
    d_out = std::move(d_act);
  }

  Vec<S> dv = Eigen::Map<const Vec<S>>(d_out.data(), arch_.flat());
  dv = (fc.d3_pre.array() > S(0)).select(dv, S(0));
  view(G, L.dfc3_w, arch_.flat(), h).noalias() += dv * fc.d2.transpose();
  vview(G, L.dfc3_b, arch_.flat()) += dv;
  Vec<S> d2 = view(params_, L.dfc3_w, arch_.flat(), h).transpose() * dv;
  d2 = (fc.d2_pre.array() > S(0)).select(d2, S(0));
  view(G, L.dfc2_w, h, h).noalias() += d2 * fc.d1.transpose();
  vview(G, L.dfc2_b, h) += d2;
  const Vec<S> d1 = view(params_, L.dfc2_w, h, h).transpose() * d2;
  if (connect) {
    const Vec<S> dg = (fc.gfi_pre.array() > S(0)).select(d1, S(0));
    view(G, L.gfi_w, h, h).noalias() += dg * vview(parent->decoder_fc1, 0, h).transpose();
    vview(G, L.gfi_b, h) += dg;
  }
  const Vec<S> d1p = (fc.d1_pre.array() > S(0)).select(d1, S(0));
  view(G, L.dfc1_w, h, l).noalias() += d1p * fc.z.transpose();
  vview(G, L.dfc1_b, h) += d1p;
  const Vec<S> dz = view(params_, L.dfc1_w, h, l).transpose() * d1p;

  Vec<S> dhead(2 * l);
  const Vec<S> sd = (S(0.5) * fc.logvar.array()).exp();
  for (int i = 0; i < l; ++i) {
    dhead[i] = dz[i] + scale * fc.mean[i];
    const S from_z = fc.sampled ? dz[i] * S(0.5) * sd[i] * fc.eps[i] : S(0);
    dhead[l + i] = from_z + scale * S(0.5) * (std::exp(fc.logvar[i]) - S(1));
  }
  view(G, L.head_w, 2 * l, h).noalias() += dhead * fc.h2.transpose();
  vview(G, L.head_b, 2 * l) += dhead;
  Vec<S> dh2 = view(params_, L.head_w, 2 * l, h).transpose() * dhead;
  dh2 = (fc.h2_pre.array() > S(0)).select(dh2, S(0));
  view(G, L.fc2_w, h, h).noalias() += dh2 * fc.h1.transpose();
  vview(G, L.fc2_b, h) += dh2;
  Vec<S> dh1 = view(params_, L.fc2_w, h, h).transpose() * dh2;
  dh1 = (fc.h1_pre.array() > S(0)).select(dh1, S(0));
  view(G, L.fc1_w, h, arch_.flat()).noalias() += dh1 * fc.flat.transpose();
  vview(G, L.fc1_b, h) += dh1;
  const Vec<S> dflat = view(params_, L.fc1_w, h, arch_.flat()).transpose() * dh1;

  d_out = CMapMat<S>(dflat.data(), 16, c);
  Mat<S> col, dcol;
  for (int i = n; i >= 1; --i) {
    const int in_side = N >> (i - 1);
    const int cin = i == 1 ? 1 : c;
    if (connect && i == arch_.encoder_tap()) {
      const CMapMat<S> p(parent->encoder_tap.data(), tap_pixels, c);
      view(G, L.lf_w, c, c).noalias() += d_out.transpose() * p;
      vview(G, L.lf_b, c) += d_out.colwise().sum().transpose();
    }
    relu_backward<S>(fc.enc_pre[i], d_out);
    im2col<S>(fc.enc_act[i - 1], in_side, col);
    view(G, L.enc_w[i - 1], c, cin * kTaps).noalias() += d_out.transpose() * col;
    vview(G, L.enc_b[i - 1], c) += d_out.colwise().sum().transpose();
    if (i > 1) {
      dcol.noalias() = d_out * view(params_, L.enc_w[i - 1], c, cin * kTaps);
      col2im<S>(dcol, in_side, cin, d_act);
      d_out = std::move(d_act);
    }
  }
}

template class VaeModel<float>;
template class VaeModel<double>;

}  // namespace holmes::nn
