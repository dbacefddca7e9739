// Classical background-subtraction error generators: running mean filter,
// frame differencing and a three-component Gaussian mixture per pixel.
// Each produces an ErrorFrame that plugs into the same grid/selection stages
// as the autoencoder.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include "roiprop/core.hpp"

namespace roiprop {

// ---------------------------------------------------------------------------
// Mean filter

struct MeanFilterState {
  int window = 50;  // exponential averaging factor 1/window
  std::optional<Image<float>> mean;
};

/// error = |frame - mean| using the mean before this frame; then mean += (frame - mean) / N.
inline ErrorFrame mean_filter_step(MeanFilterState& state, const Frame& frame) {
  if (state.window < 1) throw Error(ErrorCode::invalid_argument, "mean filter window must be >= 1");
  if (!state.mean) {
    state.mean = static_cast<const Image<float>&>(frame);
    return ErrorFrame(frame.width, frame.height, frame.channels, 0.0, frame.index);
  }
  auto& mean = *state.mean;
  if (!mean.same_shape(frame)) throw Error(ErrorCode::dimension_mismatch, "frame shape changed");
  ErrorFrame err(frame.width, frame.height, frame.channels, 0.0, frame.index);
  const float alpha = 1.0f / static_cast<float>(state.window);
  for (std::size_t i = 0; i < frame.data.size(); ++i) {
    const float d = frame.data[i] - mean.data[i];
    err.data[i] = std::fabs(static_cast<double>(d));
    mean.data[i] += alpha * d;
  }
  return err;
}

// ---------------------------------------------------------------------------
// Frame differencing

inline ErrorFrame frame_differencing_step(const Frame& prev, const Frame& cur) {
  if (!prev.same_shape(cur)) throw Error(ErrorCode::dimension_mismatch, "frames differ in shape");
  ErrorFrame err(cur.width, cur.height, cur.channels, 0.0, cur.index);
  for (std::size_t i = 0; i < cur.data.size(); ++i)
    err.data[i] = std::fabs(static_cast<double>(cur.data[i]) - static_cast<double>(prev.data[i]));
  return err;
}

// ---------------------------------------------------------------------------
// Gaussian mixture (Stauffer-Grimson, fixed K)

struct GmmParams {
  double learning_rate = 0.01;
  double match_sigmas = 2.5;
  double background_ratio = 0.9;
  double initial_variance = 0.02;
  double initial_weight = 0.05;
  double variance_floor = 1e-4;
};

struct GmmPixelState {
  static constexpr int kComponents = 3;
  static constexpr int kMaxChannels = 3;
  std::array<double, kComponents> weight{};
  std::array<std::array<double, kMaxChannels>, kComponents> mean{};
  std::array<double, kComponents> variance{};
};

struct GmmState {
  GmmParams params;
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<GmmPixelState> pixels;
};

namespace detail {

inline void gmm_normalize(GmmPixelState& px) {
  double s = 0.0;
  for (double w : px.weight) s += w;
  for (double& w : px.weight) w /= s;
}

}  // namespace detail

/// One Stauffer-Grimson update. error = 1 where the pixel matches no
/// background component (components sorted by w/sigma, background = the
/// leading ones whose weights first exceed background_ratio), else 0.
inline ErrorFrame gmm_step(GmmState& state, const Frame& frame) {
  constexpr int K = GmmPixelState::kComponents;
  const auto& p = state.params;
  if (frame.channels > GmmPixelState::kMaxChannels) throw Error(ErrorCode::invalid_argument, "too many channels");
  ErrorFrame err(frame.width, frame.height, frame.channels, 0.0, frame.index);
  const std::size_t c = static_cast<std::size_t>(frame.channels);

  if (state.pixels.empty()) {
    state.width = frame.width;
    state.height = frame.height;
    state.channels = frame.channels;
    state.pixels.resize(frame.pixel_count());
    for (std::size_t i = 0; i < state.pixels.size(); ++i) {
      auto& px = state.pixels[i];
      px.weight = {1.0, 0.0, 0.0};
      for (int k = 0; k < K; ++k) {
        px.variance[static_cast<std::size_t>(k)] = p.initial_variance;
        for (std::size_t ch = 0; ch < c; ++ch) px.mean[static_cast<std::size_t>(k)][ch] = k == 0 ? frame.data[i * c + ch] : 0.0;
      }
    }
    return err;
  }
  if (!frame.same_shape(state.width, state.height, state.channels))
    throw Error(ErrorCode::dimension_mismatch, "frame shape changed");

  const double thr2 = p.match_sigmas * p.match_sigmas;
  for (std::size_t i = 0; i < state.pixels.size(); ++i) {
    auto& px = state.pixels[i];
    const float* x = frame.data.data() + i * c;

    // background set from the current model
    std::array<int, K> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double ra = px.weight[static_cast<std::size_t>(a)] / std::sqrt(px.variance[static_cast<std::size_t>(a)]);
      const double rb = px.weight[static_cast<std::size_t>(b)] / std::sqrt(px.variance[static_cast<std::size_t>(b)]);
      if (ra != rb) return ra > rb;
      return a < b;
    });
    std::array<bool, K> background{};
    double cum = 0.0;
    for (int r = 0; r < K; ++r) {
      const auto k = static_cast<std::size_t>(order[static_cast<std::size_t>(r)]);
      background[k] = true;
      cum += px.weight[k];
      if (cum > p.background_ratio) break;
    }

    // nearest component within match_sigmas standard deviations
    int match = -1;
    double best = 0.0;
    for (int k = 0; k < K; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (px.weight[ku] <= 0.0) continue;
      double d2 = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double d = x[ch] - px.mean[ku][ch];
        d2 += d * d;
      }
      const double norm = d2 / px.variance[ku];
      if (norm <= thr2 && (match < 0 || norm < best)) {
        match = k;
        best = norm;
      }
    }

    const bool foreground = match < 0 || !background[static_cast<std::size_t>(match)];
    for (std::size_t ch = 0; ch < c; ++ch) err.data[i * c + ch] = foreground ? 1.0 : 0.0;

    const double a = p.learning_rate;
    if (match >= 0) {
      const auto m = static_cast<std::size_t>(match);
      for (int k = 0; k < K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        px.weight[ku] = (1.0 - a) * px.weight[ku] + (k == match ? a : 0.0);
      }
      double d2 = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        px.mean[m][ch] += a * (x[ch] - px.mean[m][ch]);
        const double d = x[ch] - px.mean[m][ch];
        d2 += d * d;
      }
      px.variance[m] = std::max(p.variance_floor, px.variance[m] + a * (d2 / static_cast<double>(c) - px.variance[m]));
    } else {
      int weakest = 0;
      for (int k = 1; k < K; ++k)
        if (px.weight[static_cast<std::size_t>(k)] < px.weight[static_cast<std::size_t>(weakest)]) weakest = k;
      const auto w = static_cast<std::size_t>(weakest);
      px.weight[w] = p.initial_weight;
      px.variance[w] = p.initial_variance;
      for (std::size_t ch = 0; ch < c; ++ch) px.mean[w][ch] = x[ch];
    }
    detail::gmm_normalize(px);
  }
  return err;
}

}  // namespace roiprop
