// Stride-2, 3x3 convolution kernels on planar (CHW) tensors.
//
// A single weight tensor W[s][l][ky][kx] couples a "large" tensor (spatial
// size 2h x 2w, l channels) with a "small" one (h x w, s channels):
//
//   down:  small[s][y][x] = sum W[s][l][ky][kx] * large[l][2y+ky-1][2x+kx-1]
//   up:    the adjoint of down (a transposed convolution)
//   wgrad: dW[s][l][ky][kx] = sum small[s][y][x] * large[l][2y+ky-1][2x+kx-1]
//
// An encoder convolution is `down`; its input gradient is `up`. A decoder
// deconvolution is `up`; its input gradient is `down`. Both weight gradients
// are `wgrad` with the roles of the operands fixed by spatial size.
//
// The large tensor is processed as four phase planes P[ry][rx][y][x] =
// large[2y+ry][2x+rx], which turns every tap into a contiguous row access.
#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstring>
#include <span>
#include <vector>

namespace roiprop::detail {

template <typename T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w, T fill = T{})
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * plane(); }
  const T* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * plane(); }
  T* row(int c, int y) { return channel(c) + static_cast<std::size_t>(y) * width; }
  const T* row(int c, int y) const { return channel(c) + static_cast<std::size_t>(y) * width; }
};

// Tap k in {0,1,2} reads phase (k == 1 ? 0 : 1) at offset (k == 0 ? -1 : 0).
constexpr int tap_phase(int k) { return k == 1 ? 0 : 1; }
constexpr int tap_offset(int k) { return k == 0 ? -1 : 0; }

/// Phase planes of a large tensor, laid out [l][ry*2+rx][h][w].
template <typename T>
Tensor<T> split_phases(const Tensor<T>& large) {
  assert(large.height % 2 == 0 && large.width % 2 == 0);
  const int h = large.height / 2;
  const int w = large.width / 2;
  Tensor<T> out(large.channels * 4, h, w);
  for (int l = 0; l < large.channels; ++l) {
    for (int y = 0; y < h; ++y) {
      const T* r0 = large.row(l, 2 * y);
      const T* r1 = large.row(l, 2 * y + 1);
      T* p00 = out.row(l * 4 + 0, y);
      T* p01 = out.row(l * 4 + 1, y);
      T* p10 = out.row(l * 4 + 2, y);
      T* p11 = out.row(l * 4 + 3, y);
      for (int x = 0; x < w; ++x) {
        p00[x] = r0[2 * x];
        p01[x] = r0[2 * x + 1];
        p10[x] = r1[2 * x];
        p11[x] = r1[2 * x + 1];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> merge_phases(const Tensor<T>& phases) {
  const int channels = phases.channels / 4;
  const int h = phases.height;
  const int w = phases.width;
  Tensor<T> out(channels, 2 * h, 2 * w);
  for (int l = 0; l < channels; ++l) {
    for (int y = 0; y < h; ++y) {
      T* r0 = out.row(l, 2 * y);
      T* r1 = out.row(l, 2 * y + 1);
      const T* p00 = phases.row(l * 4 + 0, y);
      const T* p01 = phases.row(l * 4 + 1, y);
      const T* p10 = phases.row(l * 4 + 2, y);
      const T* p11 = phases.row(l * 4 + 3, y);
      for (int x = 0; x < w; ++x) {
        r0[2 * x] = p00[x];
        r0[2 * x + 1] = p01[x];
        r1[2 * x] = p10[x];
        r1[2 * x + 1] = p11[x];
      }
    }
  }
  return out;
}

template <typename T>
inline void axpy(T* __restrict acc, const T* __restrict src, T w, int n) {
  for (int i = 0; i < n; ++i) acc[i] += w * src[i];
}

/// Dot product with eight independent partial sums so it vectorizes
/// without reassociating a single accumulator.
template <typename T>
inline T dot(const T* __restrict a, const T* __restrict b, int n) {
  T part[8] = {};
  int i = 0;
  for (; i + 8 <= n; i += 8)
    for (int k = 0; k < 8; ++k) part[k] += a[i + k] * b[i + k];
  T s{};
  for (; i < n; ++i) s += a[i] * b[i];
  return s + ((part[0] + part[4]) + (part[1] + part[5])) + ((part[2] + part[6]) + (part[3] + part[7]));
}

// Register tile: kBlockRows output channels x kBlockCols columns.
inline constexpr int kBlockRows = 4;
template <typename T>
inline constexpr int kBlockCols = static_cast<int>(128 / sizeof(T));

// SIMD vector (GCC/Clang vector extension), as wide as the target allows.
#if defined(__AVX__)
inline constexpr std::size_t kVecBytes = 32;
#else
inline constexpr std::size_t kVecBytes = 16;
#endif
template <typename T>
using Vec [[gnu::vector_size(kVecBytes)]] = T;
template <typename T>
inline constexpr int kVecLanes = static_cast<int>(kVecBytes / sizeof(T));

template <typename T>
inline Vec<T> load_vec(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

/// One output row of conv_down for channels [s0, s0+SB) and columns
/// [x0, x0+XB), all taps in range (x0 >= 1).
template <typename T, int SB>
inline void conv_down_tile(const Tensor<T>& ph, std::span<const T> weights, int large_ch, int y, int s0, int x0,
                           T (&out)[SB][kBlockCols<T>]) {
  constexpr int NV = kBlockCols<T> / kVecLanes<T>;
  Vec<T> acc[SB][NV];
  for (int sb = 0; sb < SB; ++sb)
    for (int v = 0; v < NV; ++v) acc[sb][v] = load_vec(out[sb] + v * kVecLanes<T>);
  for (int l = 0; l < large_ch; ++l) {
    const T* wl = weights.data() + (static_cast<std::size_t>(s0) * large_ch + l) * 9;
    const std::size_t wstride = static_cast<std::size_t>(large_ch) * 9;
    for (int ky = 0; ky < 3; ++ky) {
      const int sy = y + tap_offset(ky);
      if (sy < 0) continue;
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = ph.row(l * 4 + tap_phase(ky) * 2 + tap_phase(kx), sy) + x0 + tap_offset(kx);
        Vec<T> sv[NV];
        for (int v = 0; v < NV; ++v) sv[v] = load_vec(src + v * kVecLanes<T>);
        for (int sb = 0; sb < SB; ++sb) {
          const T wv = wl[sb * wstride + static_cast<std::size_t>(ky * 3 + kx)];
          for (int v = 0; v < NV; ++v) acc[sb][v] += wv * sv[v];
        }
      }
    }
  }
  for (int sb = 0; sb < SB; ++sb)
    for (int v = 0; v < NV; ++v) std::memcpy(out[sb] + v * kVecLanes<T>, &acc[sb][v], sizeof(Vec<T>));
}

template <typename T, int SB>
inline void conv_down_rows(const Tensor<T>& ph, std::span<const T> weights, std::span<const T> bias, int y, int s0,
                           Tensor<T>& out) {
  constexpr int XB = kBlockCols<T>;
  const int large_ch = ph.channels / 4;
  const int w = ph.width;
  int x0 = 1;
  for (; x0 + XB <= w; x0 += XB) {
    T acc[SB][XB];
    for (int sb = 0; sb < SB; ++sb) {
      const T b = bias.empty() ? T{} : bias[static_cast<std::size_t>(s0 + sb)];
      for (int xi = 0; xi < XB; ++xi) acc[sb][xi] = b;
    }
    conv_down_tile<T, SB>(ph, weights, large_ch, y, s0, x0, acc);
    for (int sb = 0; sb < SB; ++sb) std::copy(acc[sb], acc[sb] + XB, out.row(s0 + sb, y) + x0);
  }
  // column 0 and the tail, one point at a time
  auto point = [&](int s, int x) {
    T a = bias.empty() ? T{} : bias[static_cast<std::size_t>(s)];
    for (int l = 0; l < large_ch; ++l) {
      const T* wk = weights.data() + (static_cast<std::size_t>(s) * large_ch + l) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + tap_offset(ky);
        if (sy < 0) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + tap_offset(kx);
          if (sx < 0) continue;
          a += wk[ky * 3 + kx] * ph.row(l * 4 + tap_phase(ky) * 2 + tap_phase(kx), sy)[sx];
        }
      }
    }
    out.row(s, y)[x] = a;
  };
  for (int sb = 0; sb < SB; ++sb) {
    point(s0 + sb, 0);
    for (int x = x0; x < w; ++x) point(s0 + sb, x);
  }
}

/// small = down(large) (+ bias when non-empty) from the phase planes of large.
template <typename T>
Tensor<T> conv_down_phases(const Tensor<T>& ph, std::span<const T> weights, std::span<const T> bias, int small_ch) {
  assert(weights.size() == static_cast<std::size_t>(small_ch) * (ph.channels / 4) * 9);
  Tensor<T> out(small_ch, ph.height, ph.width);
  for (int y = 0; y < ph.height; ++y) {
    int s0 = 0;
    for (; s0 + kBlockRows <= small_ch; s0 += kBlockRows) conv_down_rows<T, kBlockRows>(ph, weights, bias, y, s0, out);
    for (; s0 < small_ch; ++s0) conv_down_rows<T, 1>(ph, weights, bias, y, s0, out);
  }
  return out;
}

/// small = down(large) (+ bias when non-empty). weights: [small_ch][large_ch][3][3].
template <typename T>
Tensor<T> conv_down(const Tensor<T>& large, std::span<const T> weights, std::span<const T> bias, int small_ch) {
  return conv_down_phases(split_phases(large), weights, bias, small_ch);
}

// conv_up: phase r of the large tensor receives tap k = (r == 0 ? 1 : 2) from
// small offset 0 and, for r == 1, tap k = 0 from small offset +1.

template <typename T, int LB>
inline void conv_up_rows(const Tensor<T>& small, std::span<const T> weights, std::span<const T> bias, int y, int l0,
                         int large_ch, Tensor<T>& ph) {
  constexpr int XB = kBlockCols<T>;
  const int small_ch = small.channels;
  const int h = small.height;
  const int w = small.width;
  const bool has_next = y + 1 < h;
  auto wt = [&](int s, int l, int ky, int kx) {
    return weights[(static_cast<std::size_t>(s) * large_ch + l) * 9 + static_cast<std::size_t>(ky * 3 + kx)];
  };
  for (int ry = 0; ry < 2; ++ry) {
    for (int rx = 0; rx < 2; ++rx) {
      const int ky_a = ry == 0 ? 1 : 2;
      const int kx_a = rx == 0 ? 1 : 2;
      int x0 = 0;
      // x + 1 stays inside the row for every column of a full tile
      for (; x0 + XB < w; x0 += XB) {
        T acc[LB][XB];
        for (int lb = 0; lb < LB; ++lb) {
          const T b = bias.empty() ? T{} : bias[static_cast<std::size_t>(l0 + lb)];
          for (int xi = 0; xi < XB; ++xi) acc[lb][xi] = b;
        }
        for (int s = 0; s < small_ch; ++s) {
          const T* cur = small.row(s, y) + x0;
          const T* next = has_next ? small.row(s, y + 1) + x0 : nullptr;
          T w0[LB];
          for (int lb = 0; lb < LB; ++lb) w0[lb] = wt(s, l0 + lb, ky_a, kx_a);
          for (int lb = 0; lb < LB; ++lb)
            for (int xi = 0; xi < XB; ++xi) acc[lb][xi] += w0[lb] * cur[xi];
          if (rx == 1) {
            for (int lb = 0; lb < LB; ++lb) w0[lb] = wt(s, l0 + lb, ky_a, 0);
            for (int lb = 0; lb < LB; ++lb)
              for (int xi = 0; xi < XB; ++xi) acc[lb][xi] += w0[lb] * cur[xi + 1];
          }
          if (ry == 1 && next) {
            for (int lb = 0; lb < LB; ++lb) w0[lb] = wt(s, l0 + lb, 0, kx_a);
            for (int lb = 0; lb < LB; ++lb)
              for (int xi = 0; xi < XB; ++xi) acc[lb][xi] += w0[lb] * next[xi];
            if (rx == 1) {
              for (int lb = 0; lb < LB; ++lb) w0[lb] = wt(s, l0 + lb, 0, 0);
              for (int lb = 0; lb < LB; ++lb)
                for (int xi = 0; xi < XB; ++xi) acc[lb][xi] += w0[lb] * next[xi + 1];
            }
          }
        }
        for (int lb = 0; lb < LB; ++lb) std::copy(acc[lb], acc[lb] + XB, ph.row((l0 + lb) * 4 + ry * 2 + rx, y) + x0);
      }
      for (int lb = 0; lb < LB; ++lb) {
        const int l = l0 + lb;
        T* o = ph.row(l * 4 + ry * 2 + rx, y);
        for (int x = x0; x < w; ++x) {
          T a = bias.empty() ? T{} : bias[static_cast<std::size_t>(l)];
          for (int s = 0; s < small_ch; ++s) {
            const T* cur = small.row(s, y);
            a += wt(s, l, ky_a, kx_a) * cur[x];
            if (rx == 1 && x + 1 < w) a += wt(s, l, ky_a, 0) * cur[x + 1];
            if (ry == 1 && has_next) {
              const T* next = small.row(s, y + 1);
              a += wt(s, l, 0, kx_a) * next[x];
              if (rx == 1 && x + 1 < w) a += wt(s, l, 0, 0) * next[x + 1];
            }
          }
          o[x] = a;
        }
      }
    }
  }
}

/// large = up(small) (+ bias when non-empty). Adjoint of conv_down.
template <typename T>
Tensor<T> conv_up(const Tensor<T>& small, std::span<const T> weights, std::span<const T> bias, int large_ch) {
  assert(weights.size() == static_cast<std::size_t>(small.channels) * large_ch * 9);
  Tensor<T> ph(large_ch * 4, small.height, small.width);
  for (int y = 0; y < small.height; ++y) {
    int l0 = 0;
    for (; l0 + kBlockRows <= large_ch; l0 += kBlockRows)
      conv_up_rows<T, kBlockRows>(small, weights, bias, y, l0, large_ch, ph);
    for (; l0 < large_ch; ++l0) conv_up_rows<T, 1>(small, weights, bias, y, l0, large_ch, ph);
  }
  return merge_phases(ph);
}

/// dW[s][l][ky][kx] += sum_{y,x} small[s][y][x] * large[l][2y+ky-1][2x+kx-1].
template <typename T>
void conv_weight_grad(const Tensor<T>& large, const Tensor<T>& small, std::span<T> grad) {
  const int large_ch = large.channels;
  const int small_ch = small.channels;
  assert(grad.size() == static_cast<std::size_t>(small_ch) * large_ch * 9);
  const Tensor<T> ph = split_phases(large);
  const int h = small.height;
  const int w = small.width;
  for (int y = 0; y < h; ++y) {
    for (int s = 0; s < small_ch; ++s) {
      const T* a = small.row(s, y);
      for (int l = 0; l < large_ch; ++l) {
        T* g = grad.data() + (static_cast<std::size_t>(s) * large_ch + l) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + tap_offset(ky);
          if (sy < 0) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const T* b = ph.row(l * 4 + tap_phase(ky) * 2 + tap_phase(kx), sy);
            g[ky * 3 + kx] += tap_offset(kx) < 0 ? dot(a + 1, b, w - 1) : dot(a, b, w);
          }
        }
      }
    }
  }
}

template <typename T>
void channel_sums(const Tensor<T>& t, std::span<T> out) {
  for (int c = 0; c < t.channels; ++c) {
    const T* p = t.channel(c);
    T s{};
    for (std::size_t i = 0; i < t.plane(); ++i) s += p[i];
    out[static_cast<std::size_t>(c)] += s;
  }
}

}  // namespace roiprop::detail
