#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>

namespace holmes::nn::detail {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MapMat = Eigen::Map<Mat<S>>;
template <typename S>
using CMapMat = Eigen::Map<const Mat<S>>;

inline constexpr int kKernel = 4;
inline constexpr int kTaps = kKernel * kKernel;
inline constexpr int kStride = 2;
inline constexpr int kPad = 1;

// Feature maps are (pixels x channels) column-major, i.e. CHW in memory.
// The 4x4 / stride 2 / pad 1 geometry maps a side of 2s onto s.

// Output columns ox whose input column 2 ox - 1 + k lies inside [0, side).
struct TapRange {
  int lo, hi;  // half-open
};

inline TapRange tap_range(int k, int in_side, int out_side) {
  const int lo = k == 0 ? 1 : 0;
  int hi = (in_side - k + kPad + 1) / kStride;  // first ox with 2 ox - 1 + k >= in_side
  if (hi > out_side) hi = out_side;
  return {lo, hi};
}

// col(p, c * 16 + ky * 4 + kx) = in(c, 2 oy - 1 + ky, 2 ox - 1 + kx), zero outside.
template <typename S>
void im2col(const Mat<S>& in, int in_side, Mat<S>& col) {
  const int out_side = in_side / 2;
  const int channels = static_cast<int>(in.cols());
  col.resize(static_cast<Eigen::Index>(out_side) * out_side, channels * kTaps);
  for (int c = 0; c < channels; ++c) {
    const S* src = in.data() + static_cast<std::ptrdiff_t>(c) * in_side * in_side;
    for (int ky = 0; ky < kKernel; ++ky) {
      const TapRange ry = tap_range(ky, in_side, out_side);
      for (int kx = 0; kx < kKernel; ++kx) {
        const TapRange rx = tap_range(kx, in_side, out_side);
        S* dst = col.data() + static_cast<std::ptrdiff_t>(c * kTaps + ky * kKernel + kx) * col.rows();
        for (int oy = 0; oy < out_side; ++oy) {
          S* out = dst + static_cast<std::ptrdiff_t>(oy) * out_side;
          if (oy < ry.lo || oy >= ry.hi) {
            std::fill(out, out + out_side, S(0));
            continue;
          }
          const S* row = src + static_cast<std::ptrdiff_t>(kStride * oy - kPad + ky) * in_side + kx - kPad;
          for (int ox = 0; ox < rx.lo; ++ox) out[ox] = S(0);
          for (int ox = rx.lo; ox < rx.hi; ++ox) out[ox] = row[kStride * ox];
          for (int ox = rx.hi; ox < out_side; ++ox) out[ox] = S(0);
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col entries back onto a (in_side^2 x channels) map.
template <typename S>
void col2im(const Mat<S>& col, int in_side, int channels, Mat<S>& out) {
  const int out_side = in_side / 2;
  out.setZero(static_cast<Eigen::Index>(in_side) * in_side, channels);
  for (int c = 0; c < channels; ++c) {
    S* dst = out.data() + static_cast<std::ptrdiff_t>(c) * in_side * in_side;
    for (int ky = 0; ky < kKernel; ++ky) {
      const TapRange ry = tap_range(ky, in_side, out_side);
      for (int kx = 0; kx < kKernel; ++kx) {
        const TapRange rx = tap_range(kx, in_side, out_side);
        const S* src = col.data() + static_cast<std::ptrdiff_t>(c * kTaps + ky * kKernel + kx) * col.rows();
        for (int oy = ry.lo; oy < ry.hi; ++oy) {
          S* row = dst + static_cast<std::ptrdiff_t>(kStride * oy - kPad + ky) * in_side + kx - kPad;
          const S* in = src + static_cast<std::ptrdiff_t>(oy) * out_side;
          for (int ox = rx.lo; ox < rx.hi; ++ox) row[kStride * ox] += in[ox];
        }
      }
    }
  }
}

template <typename S>
void relu_inplace(Mat<S>& m) {
  m = m.cwiseMax(S(0));
}

template <typename S>
void relu_backward(const Mat<S>& pre, Mat<S>& grad) {
  grad = (pre.array() > S(0)).select(grad, S(0));
}

}  // namespace holmes::nn::detail
