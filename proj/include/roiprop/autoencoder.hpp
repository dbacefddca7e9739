// Shallow convolutional encoder-decoder that predicts the next frame from the
// n previous ones.
//
// Encoder: num_layers stride-2 3x3 convolutions. The first maps 3n input
// channels to base_channels; each further layer halves the channel count
// (never below one). Decoder: the mirrored transposed convolutions, ending in
// three output channels. Leaky ReLU (slope 0.1) follows every layer except the
// last, whose output is clamped to [0,1].
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "roiprop/core.hpp"
#include "roiprop/detail/conv.hpp"
#include "roiprop/postprocess.hpp"

namespace roiprop {

struct ModelConfig {
  int n_input_frames = 4;
  int base_channels = 0;  // 0 selects 4 * n_input_frames
  int num_layers = 6;
  int kernel_size = 3;
  int stride = 2;
  int input_width = 0;
  int input_height = 0;
  std::uint64_t seed = 0;

  int first_channels() const { return base_channels > 0 ? base_channels : 4 * n_input_frames; }
  int spatial_multiple() const { return 1 << num_layers; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Smallest multiple of 2^layers not below `size`.
inline int padded_extent(int size, int num_layers) {
  const int m = 1 << num_layers;
  return (size + m - 1) / m * m;
}

/// Config whose input extent covers a frame of the given size after edge padding.
inline ModelConfig config_for_frame(int frame_width, int frame_height, ModelConfig base = {}) {
  base.input_width = padded_extent(frame_width, base.num_layers);
  base.input_height = padded_extent(frame_height, base.num_layers);
  return base;
}

/// Output channel count of every encoder layer.
inline std::vector<int> encoder_channels(const ModelConfig& cfg) {
  std::vector<int> ch;
  for (int i = 0; i < cfg.num_layers; ++i) ch.push_back(std::max(1, cfg.first_channels() >> i));
  return ch;
}

inline void validate_config(const ModelConfig& cfg) {
  if (cfg.n_input_frames < 1) throw Error(ErrorCode::invalid_argument, "need at least one input frame");
  if (cfg.num_layers < 1 || cfg.num_layers > 12) throw Error(ErrorCode::invalid_argument, "num_layers must be 1..12");
  if (cfg.kernel_size != 3 || cfg.stride != 2)
    throw Error(ErrorCode::invalid_argument, "only 3x3 kernels with stride 2 are supported");
  if (cfg.base_channels < 0) throw Error(ErrorCode::invalid_argument, "channel underflow");
  const int m = cfg.spatial_multiple();
  if (cfg.input_width <= 0 || cfg.input_height <= 0 || cfg.input_width % m != 0 || cfg.input_height % m != 0)
    throw Error(ErrorCode::dimension_mismatch, "input " + std::to_string(cfg.input_width) + "x" +
                                                   std::to_string(cfg.input_height) + " not divisible by " +
                                                   std::to_string(m));
}

template <typename T>
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  bool transposed = false;
  // [small][large][3][3]: [out][in] for convolutions, [in][out] for deconvolutions
  std::vector<T> weights;
  std::vector<T> bias;

  int small_channels() const { return transposed ? in_channels : out_channels; }
  int large_channels() const { return transposed ? out_channels : in_channels; }
};

template <typename T>
struct BasicModel {
  ModelConfig config;
  std::vector<ConvLayer<T>> encoder;
  std::vector<ConvLayer<T>> decoder;

  std::size_t layer_count() const { return encoder.size() + decoder.size(); }
  ConvLayer<T>& layer(std::size_t i) { return i < encoder.size() ? encoder[i] : decoder[i - encoder.size()]; }
  const ConvLayer<T>& layer(std::size_t i) const {
    return i < encoder.size() ? encoder[i] : decoder[i - encoder.size()];
  }

  /// Parameter blocks in file order: layer weights then bias, encoder first.
  std::vector<std::span<T>> parameters() {
    std::vector<std::span<T>> out;
    for (std::size_t i = 0; i < layer_count(); ++i) {
      out.emplace_back(layer(i).weights);
      out.emplace_back(layer(i).bias);
    }
    return out;
  }
  std::vector<std::span<const T>> parameters() const {
    std::vector<std::span<const T>> out;
    for (std::size_t i = 0; i < layer_count(); ++i) {
      out.emplace_back(layer(i).weights);
      out.emplace_back(layer(i).bias);
    }
    return out;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto p : parameters()) n += p.size();
    return n;
  }

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> out;
    out.config = config;
    auto copy = [](const std::vector<ConvLayer<T>>& src, std::vector<ConvLayer<U>>& dst) {
      for (const auto& l : src) {
        ConvLayer<U> c;
        c.in_channels = l.in_channels;
        c.out_channels = l.out_channels;
        c.transposed = l.transposed;
        c.weights.assign(l.weights.begin(), l.weights.end());
        c.bias.assign(l.bias.begin(), l.bias.end());
        dst.push_back(std::move(c));
      }
    };
    copy(encoder, out.encoder);
    copy(decoder, out.decoder);
    return out;
  }
};

using Model = BasicModel<float>;

namespace detail {

/// splitmix64; portable across standard libraries.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::uint64_t state_;
};

}  // namespace detail

template <typename T = float>
BasicModel<T> build_model(const ModelConfig& cfg) {
  validate_config(cfg);
  BasicModel<T> model;
  model.config = cfg;
  model.config.base_channels = cfg.first_channels();
  const auto ch = encoder_channels(cfg);
  detail::SplitMix rng(cfg.seed);
  auto init = [&](ConvLayer<T>& layer, double fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    layer.weights.resize(static_cast<std::size_t>(layer.in_channels) * layer.out_channels * 9);
    for (auto& w : layer.weights) w = static_cast<T>(rng.uniform(-bound, bound));
    layer.bias.assign(static_cast<std::size_t>(layer.out_channels), T{});
  };
  const int L = cfg.num_layers;
  for (int i = 0; i < L; ++i) {
    ConvLayer<T> layer;
    layer.in_channels = i == 0 ? 3 * cfg.n_input_frames : ch[static_cast<std::size_t>(i - 1)];
    layer.out_channels = ch[static_cast<std::size_t>(i)];
    init(layer, layer.in_channels * 9.0);
    model.encoder.push_back(std::move(layer));
  }
  for (int j = 0; j < L; ++j) {
    ConvLayer<T> layer;
    layer.transposed = true;
    layer.in_channels = ch[static_cast<std::size_t>(L - 1 - j)];
    layer.out_channels = j == L - 1 ? 3 : ch[static_cast<std::size_t>(L - 2 - j)];
    // a stride-2 transposed conv feeds each output from 9/4 taps on average
    init(layer, layer.in_channels * 9.0 / 4.0);
    model.decoder.push_back(std::move(layer));
  }
  // start the clamped output mid-range so its gradient is live
  std::fill(model.decoder.back().bias.begin(), model.decoder.back().bias.end(), T(0.5));
  return model;
}

/// FNV-1a over the float32 bit patterns of all parameters.
template <typename T>
std::uint64_t model_checksum(const BasicModel<T>& model) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto block : model.parameters()) {
    for (T v : block) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ull;
      }
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

template <typename T>
constexpr T kLeakySlope = T(0.1);

template <typename T>
void leaky_relu(Tensor<T>& t) {
  for (auto& v : t.data) v = v > T{} ? v : v * kLeakySlope<T>;
}

/// Stacks n frames (3 channels each) into a planar tensor of the model's
/// input extent, replicating edge pixels into the padding.
template <typename T>
Tensor<T> stack_frames(std::span<const Frame> frames, const ModelConfig& cfg) {
  if (static_cast<int>(frames.size()) != cfg.n_input_frames)
    throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(cfg.n_input_frames) +
                                                   " input frames, got " + std::to_string(frames.size()));
  const int fw = frames.front().width;
  const int fh = frames.front().height;
  for (const auto& f : frames) {
    if (f.width != fw || f.height != fh || f.channels != 3)
      throw Error(ErrorCode::dimension_mismatch, "input frames differ in shape or are not RGB");
  }
  if (padded_extent(fw, cfg.num_layers) != cfg.input_width || padded_extent(fh, cfg.num_layers) != cfg.input_height ||
      fw > cfg.input_width || fh > cfg.input_height)
    throw Error(ErrorCode::dimension_mismatch, "frame " + std::to_string(fw) + "x" + std::to_string(fh) +
                                                   " does not fit model input " + std::to_string(cfg.input_width) +
                                                   "x" + std::to_string(cfg.input_height));
  Tensor<T> t(3 * cfg.n_input_frames, cfg.input_height, cfg.input_width);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const Frame& f = frames[k];
    for (int c = 0; c < 3; ++c) {
      const int ch = static_cast<int>(k) * 3 + c;
      for (int y = 0; y < cfg.input_height; ++y) {
        const int sy = std::min(y, fh - 1);
        T* row = t.row(ch, y);
        const float* src = f.data.data() + static_cast<std::size_t>(sy) * fw * 3 + c;
        for (int x = 0; x < fw; ++x) row[x] = static_cast<T>(src[static_cast<std::size_t>(x) * 3]);
        const T edge = row[fw - 1];
        for (int x = fw; x < cfg.input_width; ++x) row[x] = edge;
      }
    }
  }
  return t;
}

/// stack_frames followed by split_phases, without the intermediate tensor.
template <typename T>
Tensor<T> stack_phases(std::span<const Frame> frames, const ModelConfig& cfg) {
  if (frames.empty()) throw Error(ErrorCode::dimension_mismatch, "no input frames");
  const int fw = frames.front().width;
  const int fh = frames.front().height;
  if (static_cast<int>(frames.size()) != cfg.n_input_frames || padded_extent(fw, cfg.num_layers) != cfg.input_width ||
      padded_extent(fh, cfg.num_layers) != cfg.input_height)
    return split_phases(stack_frames<T>(frames, cfg));  // reports the error
  for (const auto& f : frames)
    if (f.width != fw || f.height != fh || f.channels != 3) return split_phases(stack_frames<T>(frames, cfg));
  const int hw = cfg.input_width / 2;
  const int hh = cfg.input_height / 2;
  Tensor<T> t(12 * cfg.n_input_frames, hh, hw);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const float* px = frames[k].data.data();
    for (int y = 0; y < cfg.input_height; ++y) {
      const float* src = px + static_cast<std::size_t>(std::min(y, fh - 1)) * fw * 3;
      for (int c = 0; c < 3; ++c) {
        const int l = static_cast<int>(k) * 3 + c;
        T* even = t.row(l * 4 + (y & 1) * 2, y / 2);
        T* odd = t.row(l * 4 + (y & 1) * 2 + 1, y / 2);
        for (int x = 0; x < hw; ++x) {
          even[x] = static_cast<T>(src[static_cast<std::size_t>(std::min(2 * x, fw - 1)) * 3 + c]);
          odd[x] = static_cast<T>(src[static_cast<std::size_t>(std::min(2 * x + 1, fw - 1)) * 3 + c]);
        }
      }
    }
  }
  return t;
}

/// Decoder output (pre-clamp) without keeping intermediate activations.
template <typename T>
Tensor<T> infer_output(const BasicModel<T>& model, std::span<const Frame> frames) {
  const std::size_t n = model.layer_count();
  const auto& first = model.layer(0);
  Tensor<T> x = conv_down_phases<T>(stack_phases<T>(frames, model.config), first.weights, first.bias,
                                    first.out_channels);
  for (std::size_t i = 1; i < n; ++i) {
    leaky_relu(x);
    const auto& layer = model.layer(i);
    x = layer.transposed ? conv_up<T>(x, layer.weights, layer.bias, layer.out_channels)
                         : conv_down<T>(x, layer.weights, layer.bias, layer.out_channels);
  }
  return x;
}

}  // namespace detail

template <typename T>
struct ForwardTrace {
  std::vector<detail::Tensor<T>> inputs;  // input of every layer
  std::vector<detail::Tensor<T>> pre;     // pre-activation output of every layer
  const detail::Tensor<T>& output() const { return pre.back(); }  // unclamped
};

template <typename T>
ForwardTrace<T> forward_trace(const BasicModel<T>& model, detail::Tensor<T> input) {
  ForwardTrace<T> trace;
  detail::Tensor<T> x = std::move(input);
  const std::size_t n = model.layer_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = model.layer(i);
    detail::Tensor<T> z = layer.transposed
                              ? detail::conv_up<T>(x, layer.weights, layer.bias, layer.out_channels)
                              : detail::conv_down<T>(x, layer.weights, layer.bias, layer.out_channels);
    trace.inputs.push_back(std::move(x));
    if (i + 1 < n) {
      x = z;
      detail::leaky_relu(x);
    }
    trace.pre.push_back(std::move(z));
  }
  return trace;
}

namespace detail {

template <typename T>
Frame tensor_to_frame(const Tensor<T>& out, int fw, int fh, std::size_t index, bool clamp) {
  Frame f(fw, fh, 3, 0.0f, index);
  for (int y = 0; y < fh; ++y)
    for (int x = 0; x < fw; ++x)
      for (int c = 0; c < 3; ++c) {
        T v = out.row(c, y)[x];
        if (clamp) v = std::clamp(v, T{0}, T{1});
        f.data[(static_cast<std::size_t>(y) * fw + x) * 3 + c] = static_cast<float>(v);
      }
  return f;
}

}  // namespace detail

/// Unclamped decoder output cropped to the frame extent.
template <typename T>
Frame forward_raw(const BasicModel<T>& model, std::span<const Frame> frames) {
  auto trace = forward_trace(model, detail::stack_frames<T>(frames, model.config));
  return detail::tensor_to_frame(trace.output(), frames.front().width, frames.front().height,
                                 frames.back().index + 1, false);
}

/// Predicted next frame, clamped to [0,1] and cropped to the input frame size.
template <typename T>
Frame forward(const BasicModel<T>& model, std::span<const Frame> frames) {
  return detail::tensor_to_frame(detail::infer_output(model, frames), frames.front().width, frames.front().height,
                                 frames.back().index + 1, true);
}

// ---------------------------------------------------------------------------
// Loss

enum class LossMode { plain_l1, ignore_boxes, adversarial_boxes };

struct LossSpec {
  LossMode mode = LossMode::plain_l1;
  std::vector<BoundingBox> gt_boxes;
  /// Optional per-pixel exclusion (1 = ignored, e.g. above the horizon).
  std::vector<std::uint8_t> excluded;
};

struct LossAndGradient {
  double loss = 0.0;
  Image<double> grad;  // d loss / d prediction, same layout as the frame
};

namespace detail {

inline std::vector<std::uint8_t> box_indicator(const std::vector<BoundingBox>& boxes, int w, int h) {
  std::vector<std::uint8_t> in(static_cast<std::size_t>(w) * h, 0);
  for (auto b : boxes) {
    b = clamp_box(b, w, h);
    for (int y = b.y_min; y < b.y_max; ++y)
      for (int x = b.x_min; x < b.x_max; ++x) in[static_cast<std::size_t>(y) * w + x] = 1;
  }
  return in;
}

}  // namespace detail

/// L1 loss between a prediction and its target together with its
/// (sub)gradient with respect to the prediction; sign(0) is taken as 0.
inline LossAndGradient l1_loss_gradient(const Image<float>& pred, const Image<float>& target, const LossSpec& spec) {
  if (!pred.same_shape(target)) throw Error(ErrorCode::dimension_mismatch, "prediction and target differ in shape");
  const int w = pred.width;
  const int h = pred.height;
  const std::size_t c = static_cast<std::size_t>(pred.channels);
  if (!spec.excluded.empty() && spec.excluded.size() != pred.pixel_count())
    throw Error(ErrorCode::dimension_mismatch, "exclusion mask size differs from frame");
  if (spec.mode != LossMode::plain_l1 && spec.gt_boxes.empty())
    throw Error(ErrorCode::invalid_argument, "box loss modes need ground-truth boxes");

  const auto inside = spec.mode == LossMode::plain_l1 ? std::vector<std::uint8_t>(pred.pixel_count(), 0)
                                                      : detail::box_indicator(spec.gt_boxes, w, h);
  std::size_t n_out = 0;
  std::size_t n_in = 0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    if (!spec.excluded.empty() && spec.excluded[i]) continue;
    (inside[i] ? n_in : n_out) += 1;
  }
  if (spec.mode != LossMode::plain_l1 && n_out == 0)
    throw Error(ErrorCode::invalid_argument, "boxes cover every scored pixel");

  LossAndGradient r;
  r.grad = Image<double>(w, h, pred.channels, 0.0);
  const double w_out = n_out ? 1.0 / static_cast<double>(n_out * c) : 0.0;
  double w_in = 0.0;
  if (spec.mode == LossMode::adversarial_boxes && n_in) w_in = -1.0 / static_cast<double>(n_in * c);
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    if (!spec.excluded.empty() && spec.excluded[i]) continue;
    const double scale = inside[i] ? w_in : w_out;
    if (scale == 0.0) continue;
    for (std::size_t k = 0; k < c; ++k) {
      const double d = static_cast<double>(pred.data[i * c + k]) - static_cast<double>(target.data[i * c + k]);
      r.loss += scale * std::fabs(d);
      r.grad.data[i * c + k] = d > 0 ? scale : (d < 0 ? -scale : 0.0);
    }
  }
  return r;
}

inline double l1_loss(const Image<float>& pred, const Image<float>& target, const LossSpec& spec) {
  return l1_loss_gradient(pred, target, spec).loss;
}

// ---------------------------------------------------------------------------
// Backward

template <typename T>
struct Gradients {
  std::vector<std::vector<T>> blocks;  // same order as BasicModel::parameters()
  double loss = 0.0;

  double norm() const {
    double s = 0.0;
    for (const auto& b : blocks)
      for (T v : b) s += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(s);
  }
};

template <typename T>
Gradients<T> zero_gradients(const BasicModel<T>& model) {
  Gradients<T> g;
  for (auto p : model.parameters()) g.blocks.emplace_back(p.size(), T{});
  return g;
}

/// Adds the gradient of one sample's loss to `grads` and returns the loss.
/// The loss is evaluated in double precision on the clamped prediction.
template <typename T>
double accumulate_gradient(const BasicModel<T>& model, std::span<const Frame> frames, const Frame& target,
                           const LossSpec& spec, Gradients<T>& grads) {
  auto trace = forward_trace(model, detail::stack_frames<T>(frames, model.config));
  const int fw = frames.front().width;
  const int fh = frames.front().height;
  if (target.width != fw || target.height != fh || target.channels != 3)
    throw Error(ErrorCode::dimension_mismatch, "target frame differs from inputs");

  // The loss works on float frames; evaluate it on the exact unclamped values
  // through a double image instead so double models keep full precision.
  const auto& out = trace.output();
  Image<double> pred(fw, fh, 3);
  for (int y = 0; y < fh; ++y)
    for (int x = 0; x < fw; ++x)
      for (int c = 0; c < 3; ++c)
        pred.at(x, y, c) = std::clamp(static_cast<double>(out.row(c, y)[x]), 0.0, 1.0);

  // l1 on doubles: same rules as l1_loss_gradient
  const std::size_t npx = static_cast<std::size_t>(fw) * fh;
  if (!spec.excluded.empty() && spec.excluded.size() != npx)
    throw Error(ErrorCode::dimension_mismatch, "exclusion mask size differs from frame");
  if (spec.mode != LossMode::plain_l1 && spec.gt_boxes.empty())
    throw Error(ErrorCode::invalid_argument, "box loss modes need ground-truth boxes");
  const auto inside = spec.mode == LossMode::plain_l1 ? std::vector<std::uint8_t>(npx, 0)
                                                      : detail::box_indicator(spec.gt_boxes, fw, fh);
  std::size_t n_out = 0, n_in = 0;
  for (std::size_t i = 0; i < npx; ++i) {
    if (!spec.excluded.empty() && spec.excluded[i]) continue;
    (inside[i] ? n_in : n_out) += 1;
  }
  if (spec.mode != LossMode::plain_l1 && n_out == 0)
    throw Error(ErrorCode::invalid_argument, "boxes cover every scored pixel");
  const double w_out = n_out ? 1.0 / static_cast<double>(n_out * 3) : 0.0;
  const double w_in = spec.mode == LossMode::adversarial_boxes && n_in ? -1.0 / static_cast<double>(n_in * 3) : 0.0;

  const auto& cfg = model.config;
  detail::Tensor<T> g(3, cfg.input_height, cfg.input_width);
  double loss = 0.0;
  for (int y = 0; y < fh; ++y) {
    for (int x = 0; x < fw; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * fw + x;
      if (!spec.excluded.empty() && spec.excluded[i]) continue;
      const double scale = inside[i] ? w_in : w_out;
      if (scale == 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = pred.at(x, y, c) - static_cast<double>(target.at(x, y, c));
        loss += scale * std::fabs(d);
        const T z = out.row(c, y)[x];
        if (z < T{0} || z > T{1}) continue;  // clamp kills the gradient
        g.row(c, y)[x] = static_cast<T>(d > 0 ? scale : (d < 0 ? -scale : 0.0));
      }
    }
  }

  const std::size_t n = model.layer_count();
  for (std::size_t ii = n; ii-- > 0;) {
    const auto& layer = model.layer(ii);
    const auto& input = trace.inputs[ii];
    auto& gw = grads.blocks[2 * ii];
    auto& gb = grads.blocks[2 * ii + 1];
    if (ii + 1 < n) {
      const auto& z = trace.pre[ii];
      for (std::size_t k = 0; k < g.data.size(); ++k)
        if (!(z.data[k] > T{})) g.data[k] *= detail::kLeakySlope<T>;
    }
    detail::channel_sums<T>(g, gb);
    if (layer.transposed) {
      detail::conv_weight_grad<T>(g, input, gw);
      if (ii > 0) g = detail::conv_down<T>(g, layer.weights, {}, layer.in_channels);
    } else {
      detail::conv_weight_grad<T>(input, g, gw);
      if (ii > 0) g = detail::conv_up<T>(g, layer.weights, {}, layer.in_channels);
    }
  }
  grads.loss += loss;
  return loss;
}

template <typename T>
Gradients<T> backward(const BasicModel<T>& model, std::span<const Frame> frames, const Frame& target,
                      const LossSpec& spec) {
  auto g = zero_gradients(model);
  accumulate_gradient(model, frames, target, spec, g);
  return g;
}

/// Loss of the clamped prediction, evaluated in the model's precision path.
template <typename T>
double prediction_loss(const BasicModel<T>& model, std::span<const Frame> frames, const Frame& target,
                       const LossSpec& spec) {
  Gradients<T> scratch = zero_gradients(model);
  return accumulate_gradient(model, frames, target, spec, scratch);
}

// ---------------------------------------------------------------------------
// Training

/// A run of consecutive frames; every window of n+1 frames is one sample.
struct TrainingSequence {
  std::vector<Frame> frames;
  GroundTruth gt;  // keyed by Frame::index
};

struct TrainOptions {
  int epochs = 1;
  double learning_rate = 1e-3;
  int batch_size = 1;
  std::size_t max_steps = 0;  // 0 = no limit
  LossMode loss = LossMode::plain_l1;
  bool horizon = true;  // exclude pixels above the horizon when telemetry exists
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::function<void(int epoch, double mean_loss, std::size_t steps)> on_epoch;
};

struct TrainReport {
  std::vector<double> epoch_losses;
  std::size_t steps = 0;
  double first_step_loss = 0.0;
  double last_step_loss = 0.0;
};

struct SampleRef {
  std::size_t sequence = 0;
  std::size_t start = 0;
};

inline std::vector<SampleRef> training_windows(const std::vector<TrainingSequence>& data, int n_inputs) {
  std::vector<SampleRef> refs;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto len = data[s].frames.size();
    for (std::size_t i = 0; i + static_cast<std::size_t>(n_inputs) < len; ++i) refs.push_back({s, i});
  }
  return refs;
}

inline LossSpec sample_loss_spec(const Frame& target, const GroundTruth& gt, const TrainOptions& opt) {
  LossSpec spec;
  spec.mode = opt.loss;
  if (opt.loss != LossMode::plain_l1) {
    if (auto it = gt.find(target.index); it != gt.end()) spec.gt_boxes = it->second;
    // frames without objects train as plain L1 on everything
    if (spec.gt_boxes.empty()) spec.mode = LossMode::plain_l1;
  }
  if (opt.horizon && target.telemetry) {
    const auto line = horizon_line(*target.telemetry, target.width, target.height);
    if (line.state != HorizonState::above_frame) spec.excluded = horizon_mask(line, target.width, target.height);
  }
  return spec;
}

/// Adam on the chosen loss. Deterministic for a fixed seed and data order.
template <typename T>
TrainReport train(BasicModel<T>& model, const std::vector<TrainingSequence>& data, const TrainOptions& opt) {
  const int n = model.config.n_input_frames;
  auto refs = training_windows(data, n);
  if (refs.empty()) throw Error(ErrorCode::invalid_argument, "training set has no window of n+1 frames");
  if (opt.batch_size < 1 || opt.epochs < 0) throw Error(ErrorCode::invalid_argument, "bad batch size or epochs");

  auto params = model.parameters();
  std::vector<std::vector<double>> m1, m2;
  for (auto p : params) {
    m1.emplace_back(p.size(), 0.0);
    m2.emplace_back(p.size(), 0.0);
  }
  detail::SplitMix rng(opt.seed ^ 0x5eed5eedull);
  TrainReport report;
  std::size_t step = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = refs.size(); i > 1; --i) std::swap(refs[i - 1], refs[rng.below(i)]);
    double epoch_loss = 0.0;
    std::size_t epoch_samples = 0;
    for (std::size_t b = 0; b < refs.size(); b += static_cast<std::size_t>(opt.batch_size)) {
      if (opt.max_steps && step >= opt.max_steps) break;
      auto grads = zero_gradients(model);
      const std::size_t end = std::min(refs.size(), b + static_cast<std::size_t>(opt.batch_size));
      double batch_loss = 0.0;
      for (std::size_t r = b; r < end; ++r) {
        const auto& seq = data[refs[r].sequence];
        std::span<const Frame> inputs(seq.frames.data() + refs[r].start, static_cast<std::size_t>(n));
        const Frame& target = seq.frames[refs[r].start + static_cast<std::size_t>(n)];
        batch_loss += accumulate_gradient(model, inputs, target, sample_loss_spec(target, seq.gt, opt), grads);
      }
      const double count = static_cast<double>(end - b);
      if (!std::isfinite(batch_loss))
        throw Error(ErrorCode::numeric, "non-finite loss at step " + std::to_string(step) + " (epoch " +
                                            std::to_string(epoch) + ")");
      ++step;
      const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k];
        const auto& gk = grads.blocks[k];
        for (std::size_t j = 0; j < p.size(); ++j) {
          const double gj = static_cast<double>(gk[j]) / count;
          m1[k][j] = opt.beta1 * m1[k][j] + (1.0 - opt.beta1) * gj;
          m2[k][j] = opt.beta2 * m2[k][j] + (1.0 - opt.beta2) * gj * gj;
          const double update = opt.learning_rate * (m1[k][j] / c1) / (std::sqrt(m2[k][j] / c2) + opt.epsilon);
          p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
        }
      }
      if (report.steps == 0 && step == 1) report.first_step_loss = batch_loss / count;
      report.last_step_loss = batch_loss / count;
      report.steps = step;
      epoch_loss += batch_loss;
      epoch_samples += end - b;
    }
    const double mean = epoch_samples ? epoch_loss / static_cast<double>(epoch_samples) : 0.0;
    report.epoch_losses.push_back(mean);
    if (opt.on_epoch) opt.on_epoch(epoch, mean, step);
    if (opt.max_steps && step >= opt.max_steps) break;
  }
  return report;
}

/// Mean loss of a model over every window of a data set, without updating it.
template <typename T>
double evaluate_loss(const BasicModel<T>& model, const std::vector<TrainingSequence>& data, const TrainOptions& opt) {
  const int n = model.config.n_input_frames;
  const auto refs = training_windows(data, n);
  if (refs.empty()) throw Error(ErrorCode::invalid_argument, "no window of n+1 frames");
  double total = 0.0;
  for (const auto& r : refs) {
    const auto& seq = data[r.sequence];
    std::span<const Frame> inputs(seq.frames.data() + r.start, static_cast<std::size_t>(n));
    const Frame& target = seq.frames[r.start + static_cast<std::size_t>(n)];
    total += prediction_loss(model, inputs, target, sample_loss_spec(target, seq.gt, opt));
  }
  return total / static_cast<double>(refs.size());
}

// ---------------------------------------------------------------------------
// Weight file: "ROIAE01\0", eight little-endian int64 config fields, then
// little-endian float32 parameters in parameters() order.

inline constexpr char kModelMagic[8] = {'R', 'O', 'I', 'A', 'E', '0', '1', '\0'};

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace detail

template <typename T>
std::string serialize_model(const BasicModel<T>& model) {
  std::string out(kModelMagic, 8);
  const auto& c = model.config;
  for (std::int64_t v : {std::int64_t{c.n_input_frames}, std::int64_t{c.first_channels()}, std::int64_t{c.num_layers},
                         std::int64_t{c.kernel_size}, std::int64_t{c.stride}, std::int64_t{c.input_width},
                         std::int64_t{c.input_height}, static_cast<std::int64_t>(c.seed)})
    detail::put_le(out, static_cast<std::uint64_t>(v), 8);
  for (auto block : model.parameters())
    for (T v : block) detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
  return out;
}

inline Model deserialize_model(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kModelMagic, 8) != 0)
    throw Error(ErrorCode::bad_magic, "not a model weight file");
  if (bytes.size() < 8 + 8 * 8) throw Error(ErrorCode::truncated, "model header truncated");
  auto field = [&](int i) { return static_cast<std::int64_t>(detail::get_le(bytes, 8 + 8 * static_cast<std::size_t>(i), 8)); };
  ModelConfig cfg;
  cfg.n_input_frames = static_cast<int>(field(0));
  cfg.base_channels = static_cast<int>(field(1));
  cfg.num_layers = static_cast<int>(field(2));
  cfg.kernel_size = static_cast<int>(field(3));
  cfg.stride = static_cast<int>(field(4));
  cfg.input_width = static_cast<int>(field(5));
  cfg.input_height = static_cast<int>(field(6));
  cfg.seed = static_cast<std::uint64_t>(field(7));
  Model model = build_model<float>(cfg);
  std::size_t pos = 8 + 8 * 8;
  const std::size_t need = pos + 4 * model.parameter_count();
  if (bytes.size() < need)
    throw Error(ErrorCode::truncated, "expected " + std::to_string(need) + " bytes, got " + std::to_string(bytes.size()));
  if (bytes.size() > need) throw Error(ErrorCode::parse, "trailing bytes after model weights");
  for (auto block : model.parameters()) {
    for (auto& v : block) {
      v = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(bytes, pos, 4)));
      pos += 4;
    }
  }
  return model;
}

template <typename T>
void save_model(const BasicModel<T>& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot write " + path);
  const auto bytes = serialize_model(model);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::io, "write failed for " + path);
}

inline Model load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot read " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace roiprop
