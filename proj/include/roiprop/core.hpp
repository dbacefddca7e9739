// Shared domain types for the region-of-interest proposal pipeline.
//
// Pixel convention: origin top-left, x grows rightward, y grows downward.
// Frames store interleaved channel values (row-major, HWC) normalized to [0,1].
// Boxes are half-open pixel rectangles [x_min, x_max) x [y_min, y_max).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace roiprop {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  out_of_range,
  io,
  parse,
  bad_magic,
  truncated,
  config_mismatch,
  budget_violation,
  numeric,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::out_of_range: return "out of range";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::config_mismatch: return "config mismatch";
    case ErrorCode::budget_violation: return "budget violation";
    case ErrorCode::numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// UAV pose and camera intrinsics attached to a frame.
struct Telemetry {
  double altitude_m = 0.0;        // above sea surface
  double gimbal_pitch_deg = 0.0;  // 0 = horizontal, positive = pitched down
  double roll_deg = 0.0;
  double focal_px = 1.0;

  bool valid() const { return altitude_m >= 0.0 && focal_px > 0.0; }
  friend bool operator==(const Telemetry&, const Telemetry&) = default;
};

/// Dense interleaved image with `channels` values per pixel.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::size_t offset(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
  T& at(int x, int y, int c = 0) { return data[offset(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[offset(x, y, c)]; }
  bool same_shape(int w, int h, int c) const { return width == w && height == h && channels == c; }
  template <typename U>
  bool same_shape(const Image<U>& other) const {
    return same_shape(other.width, other.height, other.channels);
  }
};

struct Frame : Image<float> {
  std::size_t index = 0;
  std::optional<Telemetry> telemetry;

  Frame() = default;
  Frame(int w, int h, int c = 3, float fill = 0.0f, std::size_t idx = 0) : Image<float>(w, h, c, fill), index(idx) {}

  friend bool operator==(const Frame& a, const Frame& b) {
    return a.width == b.width && a.height == b.height && a.channels == b.channels && a.index == b.index &&
           a.telemetry == b.telemetry && a.data == b.data;
  }
};

/// Per-pixel nonnegative reconstruction error. Kept in double precision because
/// the local noise remover raises values to high powers.
struct ErrorFrame : Image<double> {
  std::size_t source_frame_index = 0;

  ErrorFrame() = default;
  ErrorFrame(int w, int h, int c = 3, double fill = 0.0, std::size_t src = 0)
      : Image<double>(w, h, c, fill), source_frame_index(src) {}

  /// Mean over channels for every pixel, row-major.
  std::vector<double> channel_mean() const {
    std::vector<double> out(pixel_count());
    const auto c = static_cast<std::size_t>(channels);
    for (std::size_t i = 0; i < out.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < c; ++k) s += data[i * c + k];
      out[i] = s / static_cast<double>(c);
    }
    return out;
  }
};

struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;
  std::optional<double> score;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  bool well_formed() const { return x_min < x_max && y_min < y_max; }
  bool inside(int frame_width, int frame_height) const {
    return x_min >= 0 && y_min >= 0 && x_max <= frame_width && y_max <= frame_height;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline std::int64_t box_area(const BoundingBox& box) {
  return static_cast<std::int64_t>(box.x_max - box.x_min) * static_cast<std::int64_t>(box.y_max - box.y_min);
}

inline std::int64_t intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const int w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const int h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0 || h <= 0) return 0;
  return static_cast<std::int64_t>(w) * h;
}

/// Clamp to [0,w) x [0,h). The result may be degenerate if the box lies outside.
inline BoundingBox clamp_box(BoundingBox box, int frame_width, int frame_height) {
  box.x_min = std::clamp(box.x_min, 0, frame_width);
  box.x_max = std::clamp(box.x_max, 0, frame_width);
  box.y_min = std::clamp(box.y_min, 0, frame_height);
  box.y_max = std::clamp(box.y_max, 0, frame_height);
  return box;
}

struct GridSpec {
  int columns = 48;
  int rows = 27;

  int cell_count() const { return columns * rows; }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline void check_grid(const GridSpec& grid, int width, int height) {
  if (grid.columns < 1 || grid.rows < 1)
    throw Error(ErrorCode::invalid_argument, "grid needs at least one row and column");
  if (grid.columns > width || grid.rows > height)
    throw Error(ErrorCode::invalid_argument, "grid " + std::to_string(grid.columns) + "x" +
                                                 std::to_string(grid.rows) + " larger than frame " +
                                                 std::to_string(width) + "x" + std::to_string(height));
}

/// Number of cells a budget p admits: ceil(p * cells).
inline int budget_cells(double budget_p, const GridSpec& grid) {
  if (!(budget_p > 0.0 && budget_p <= 1.0))
    throw Error(ErrorCode::invalid_argument, "budget p must lie in (0,1], got " + std::to_string(budget_p));
  const double exact = budget_p * static_cast<double>(grid.cell_count());
  const int k = static_cast<int>(std::ceil(exact - 1e-9));
  return std::clamp(k, 1, grid.cell_count());
}

/// Largest cell area of a grid whose last row/column absorbs remainder pixels.
inline std::int64_t max_cell_area(const GridSpec& grid, int width, int height) {
  const int cw = width / grid.columns;
  const int ch = height / grid.rows;
  return static_cast<std::int64_t>(cw + width % grid.columns) * (ch + height % grid.rows);
}

/// Area a region set at budget p may occupy under grid selection.
inline std::int64_t budget_area(double budget_p, const GridSpec& grid, int width, int height) {
  return static_cast<std::int64_t>(budget_cells(budget_p, grid)) * max_cell_area(grid, width, height);
}

struct RegionSet {
  std::size_t frame_index = 0;
  std::vector<BoundingBox> regions;
  double budget_p = 1.0;
  int frame_width = 0;   // 0 when unknown
  int frame_height = 0;

  std::int64_t total_area() const {
    std::int64_t s = 0;
    for (const auto& r : regions) s += box_area(r);
    return s;
  }
  friend bool operator==(const RegionSet&, const RegionSet&) = default;
};

/// Ground-truth boxes keyed by frame index. Frames without objects may be absent.
using GroundTruth = std::map<std::size_t, std::vector<BoundingBox>>;

struct FrameValidation {
  enum class Kind { ok, dimension, out_of_range };
  Kind kind = Kind::ok;
  std::size_t offending_index = 0;
  std::string message;

  bool ok() const { return kind == Kind::ok; }
  explicit operator bool() const { return ok(); }
};

inline FrameValidation validate_frame(const Frame& frame) {
  if (frame.width <= 0 || frame.height <= 0 || frame.channels <= 0)
    return {FrameValidation::Kind::dimension, 0, "non-positive frame dimensions"};
  const std::size_t expected = frame.pixel_count() * static_cast<std::size_t>(frame.channels);
  if (frame.data.size() != expected)
    return {FrameValidation::Kind::dimension, 0,
            "data length " + std::to_string(frame.data.size()) + " != " + std::to_string(expected)};
  for (std::size_t i = 0; i < frame.data.size(); ++i) {
    const float v = frame.data[i];
    if (!(v >= 0.0f && v <= 1.0f))
      return {FrameValidation::Kind::out_of_range, i,
              "value " + std::to_string(v) + " at index " + std::to_string(i) + " outside [0,1]"};
  }
  if (frame.telemetry && !frame.telemetry->valid())
    return {FrameValidation::Kind::out_of_range, 0, "invalid telemetry"};
  return {};
}

inline void require_valid(const Frame& frame) {
  const auto v = validate_frame(frame);
  if (!v.ok())
    throw Error(v.kind == FrameValidation::Kind::dimension ? ErrorCode::dimension_mismatch : ErrorCode::out_of_range,
                v.message);
}

/// Absolute difference of two frames, per pixel and channel.
inline ErrorFrame absolute_difference(const Frame& a, const Frame& b) {
  if (!a.same_shape(b))
    throw Error(ErrorCode::dimension_mismatch, "frames differ in shape");
  ErrorFrame out(a.width, a.height, a.channels, 0.0, b.index);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    out.data[i] = std::fabs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
  return out;
}

}  // namespace roiprop
