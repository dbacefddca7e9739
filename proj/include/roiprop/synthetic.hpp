// Procedural maritime scenes with exact ground truth: drifting sinusoidal
// swell plus per-frame sensor noise, one-frame sun glints, and persistent
// moving rectangles as anomalies.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "roiprop/core.hpp"
#include "roiprop/image_io.hpp"
#include "roiprop/postprocess.hpp"

namespace roiprop {

struct SyntheticAnomaly {
  double x = 0.0;  // top-left at entry_frame
  double y = 0.0;
  int width = 16;
  int height = 16;
  double intensity = 0.9;
  double vx = 0.0;  // px per frame
  double vy = 0.0;
  int entry_frame = 0;
  int duration = 0;  // frames; 0 = until the end of the sequence

  friend bool operator==(const SyntheticAnomaly&, const SyntheticAnomaly&) = default;
};

struct SyntheticConfig {
  int width = 384;
  int height = 216;
  int num_frames = 500;
  std::uint64_t seed = 1;
  std::size_t first_index = 0;

  double base_level = 0.35;
  double wave_amplitude = 0.08;
  double wave_speed = 1.5;      // phase drift in px per frame
  double wave_length = 24.0;    // px, shortest swell component
  double luminance_drift = 0.02;  // slow global brightness oscillation amplitude
  double noise_sigma = 0.02;
  // Drifting cloud shadows: smooth dark blobs, part of the normal background.
  int shadows = 0;
  double shadow_radius = 40.0;
  double shadow_depth = 0.1;
  double shadow_speed = 0.5;

  double transient_glints = 5.0;  // mean count per frame
  int glint_min_size = 2;
  int glint_size = 3;  // largest glint edge
  double glint_intensity = 0.95;
  // A glint event is one speckle, or with a radius, a patch of scattered
  // speckles (sun glitter) of the given density.
  int glint_patch_radius = 0;
  double glint_density = 0.3;

  std::vector<SyntheticAnomaly> anomalies;
  // Extra anomalies drawn from the seed; each stays fully in frame.
  int random_anomalies = 0;
  int anomaly_min_size = 12;
  int anomaly_max_size = 28;
  double anomaly_max_speed = 0.6;
  int anomaly_min_duration = 60;
  int anomaly_max_duration = 200;
  // Drawn anomalies sit this far beyond the brightest (or darkest) swell value.
  double anomaly_min_contrast = 0.2;
  double anomaly_max_contrast = 0.4;
  double anomaly_bright_fraction = 0.6;
  double min_contrast = 0.15;

  bool telemetry = true;
  Telemetry camera{100.0, 60.0, 0.0, 1000.0};
  double sky_level = 0.8;
};

inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  try {
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.num_frames = j.value("num_frames", c.num_frames);
    c.seed = j.value("seed", c.seed);
    c.first_index = j.value("first_index", c.first_index);
    c.base_level = j.value("base_level", c.base_level);
    c.wave_amplitude = j.value("wave_amplitude", c.wave_amplitude);
    c.wave_speed = j.value("wave_speed", c.wave_speed);
    c.wave_length = j.value("wave_length", c.wave_length);
    c.luminance_drift = j.value("luminance_drift", c.luminance_drift);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.shadows = j.value("shadows", c.shadows);
    c.shadow_radius = j.value("shadow_radius", c.shadow_radius);
    c.shadow_depth = j.value("shadow_depth", c.shadow_depth);
    c.shadow_speed = j.value("shadow_speed", c.shadow_speed);
    c.transient_glints = j.value("transient_glints", c.transient_glints);
    c.glint_min_size = j.value("glint_min_size", c.glint_min_size);
    c.glint_size = j.value("glint_size", c.glint_size);
    c.glint_intensity = j.value("glint_intensity", c.glint_intensity);
    c.glint_patch_radius = j.value("glint_patch_radius", c.glint_patch_radius);
    c.glint_density = j.value("glint_density", c.glint_density);
    c.random_anomalies = j.value("random_anomalies", c.random_anomalies);
    c.anomaly_min_size = j.value("anomaly_min_size", c.anomaly_min_size);
    c.anomaly_max_size = j.value("anomaly_max_size", c.anomaly_max_size);
    c.anomaly_max_speed = j.value("anomaly_max_speed", c.anomaly_max_speed);
    c.anomaly_min_duration = j.value("anomaly_min_duration", c.anomaly_min_duration);
    c.anomaly_max_duration = j.value("anomaly_max_duration", c.anomaly_max_duration);
    c.anomaly_min_contrast = j.value("anomaly_min_contrast", c.anomaly_min_contrast);
    c.anomaly_max_contrast = j.value("anomaly_max_contrast", c.anomaly_max_contrast);
    c.anomaly_bright_fraction = j.value("anomaly_bright_fraction", c.anomaly_bright_fraction);
    c.min_contrast = j.value("min_contrast", c.min_contrast);
    c.sky_level = j.value("sky_level", c.sky_level);
    if (j.contains("anomalies")) {
      for (const auto& a : j.at("anomalies")) {
        SyntheticAnomaly s;
        s.x = a.at("x").get<double>();
        s.y = a.at("y").get<double>();
        if (a.contains("size")) {
          s.width = s.height = a.at("size").get<int>();
        } else {
          s.width = a.at("width").get<int>();
          s.height = a.at("height").get<int>();
        }
        s.intensity = a.value("intensity", s.intensity);
        s.vx = a.value("vx", 0.0);
        s.vy = a.value("vy", 0.0);
        s.entry_frame = a.value("entry_frame", 0);
        s.duration = a.value("duration", 0);
        c.anomalies.push_back(s);
      }
    }
    if (j.contains("telemetry")) {
      const auto& t = j.at("telemetry");
      c.telemetry = true;
      c.camera.altitude_m = t.value("altitude_m", c.camera.altitude_m);
      c.camera.gimbal_pitch_deg = t.value("gimbal_pitch_deg", c.camera.gimbal_pitch_deg);
      c.camera.roll_deg = t.value("roll_deg", c.camera.roll_deg);
      c.camera.focal_px = t.value("focal_px", c.camera.focal_px);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("synthetic config: ") + e.what());
  }
  return c;
}

struct SyntheticSequence {
  std::vector<Frame> frames;
  GroundTruth gt;
  std::vector<SyntheticAnomaly> anomalies;  // explicit plus drawn
};

namespace detail {

struct Swell {
  double kx, ky, omega, phase, weight;
};

struct Shadow {
  double x, y, vx, vy, radius;
};

inline int anomaly_last_frame(const SyntheticAnomaly& a, int num_frames) {
  return a.duration > 0 ? std::min(num_frames, a.entry_frame + a.duration) - 1 : num_frames - 1;
}

inline BoundingBox anomaly_box(const SyntheticAnomaly& a, int t) {
  const double dt = static_cast<double>(t - a.entry_frame);
  const int x = static_cast<int>(std::lround(a.x + a.vx * dt));
  const int y = static_cast<int>(std::lround(a.y + a.vy * dt));
  return {x, y, x + a.width, y + a.height, std::nullopt};
}

}  // namespace detail

/// Background luminance at (x, y, t) without noise, glints or anomalies.
class SwellField {
 public:
  SwellField(const SyntheticConfig& c, std::mt19937_64& rng) : cfg_(c) {
    std::uniform_real_distribution<double> angle(-0.6, 0.6), phase(0.0, 2.0 * std::numbers::pi);
    const double lengths[3] = {c.wave_length, c.wave_length * 1.7, c.wave_length * 3.1};
    const double weights[3] = {0.5, 0.3, 0.2};
    for (int k = 0; k < 3; ++k) {
      const double kmag = 2.0 * std::numbers::pi / lengths[k];
      const double a = angle(rng) + std::numbers::pi / 2.0;  // mostly travelling down the image
      detail::Swell s{kmag * std::cos(a), kmag * std::sin(a), kmag * c.wave_speed * (1.0 + 0.3 * k), phase(rng),
                      weights[k]};
      swells_.push_back(s);
    }
    drift_phase_ = phase(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < c.shadows; ++i) {
      const double a = phase(rng);
      shadows_.push_back({unit(rng) * c.width, unit(rng) * c.height, c.shadow_speed * std::cos(a),
                          c.shadow_speed * std::sin(a), c.shadow_radius * (0.6 + 0.8 * unit(rng))});
    }
  }

  double level(int t) const {
    return cfg_.base_level + cfg_.luminance_drift * std::sin(2.0 * std::numbers::pi * t / 97.0 + drift_phase_);
  }

  /// Fills one row of luminance values for frame t.
  void row(int t, int y, std::vector<double>& out) const {
    out.assign(static_cast<std::size_t>(cfg_.width), level(t));
    for (const auto& s : swells_) {
      const double a = cfg_.wave_amplitude * s.weight;
      const double base = s.ky * y - s.omega * t + s.phase;
      for (int x = 0; x < cfg_.width; ++x) out[static_cast<std::size_t>(x)] += a * std::sin(s.kx * x + base);
    }
    for (const auto& s : shadows_) {
      // wrap so shadows keep crossing the frame
      const double cx = std::fmod(std::fmod(s.x + s.vx * t, cfg_.width) + cfg_.width, cfg_.width);
      const double cy = std::fmod(std::fmod(s.y + s.vy * t, cfg_.height) + cfg_.height, cfg_.height);
      const double inv = 1.0 / (2.0 * s.radius * s.radius);
      double dy = std::fabs(y - cy);
      dy = std::min(dy, cfg_.height - dy);
      const double fy = std::exp(-dy * dy * inv);
      if (fy < 1e-4) continue;
      for (int x = 0; x < cfg_.width; ++x) {
        double dx = std::fabs(x - cx);
        dx = std::min(dx, cfg_.width - dx);
        out[static_cast<std::size_t>(x)] -= cfg_.shadow_depth * fy * std::exp(-dx * dx * inv);
      }
    }
  }

  /// Mean luminance over a box for frame t.
  double box_mean(int t, const BoundingBox& b) const {
    std::vector<double> r;
    double sum = 0.0;
    for (int y = b.y_min; y < b.y_max; ++y) {
      row(t, y, r);
      for (int x = b.x_min; x < b.x_max; ++x) sum += r[static_cast<std::size_t>(x)];
    }
    return sum / static_cast<double>(box_area(b));
  }

 private:
  SyntheticConfig cfg_;
  std::vector<detail::Swell> swells_;
  std::vector<detail::Shadow> shadows_;
  double drift_phase_ = 0.0;
};

inline void validate_synthetic_config(const SyntheticConfig& c) {
  if (c.width < 1 || c.height < 1 || c.num_frames < 1)
    throw Error(ErrorCode::invalid_argument, "synthetic size and frame count must be positive");
  if (c.noise_sigma < 0 || c.transient_glints < 0 || c.wave_amplitude < 0)
    throw Error(ErrorCode::invalid_argument, "noise, glint rate and amplitude must be nonnegative");
  if (c.glint_min_size < 1 || c.glint_size < c.glint_min_size || c.glint_patch_radius < 0 || c.glint_density < 0 ||
      c.glint_density > 1)
    throw Error(ErrorCode::invalid_argument, "bad glint size range");
  if (c.anomaly_min_contrast < 0 || c.anomaly_max_contrast < c.anomaly_min_contrast)
    throw Error(ErrorCode::invalid_argument, "bad anomaly contrast range");
  if (c.random_anomalies < 0 || c.anomaly_min_size < 1 || c.anomaly_max_size < c.anomaly_min_size ||
      c.anomaly_max_size > std::min(c.width, c.height) || c.anomaly_min_duration < 1 ||
      c.anomaly_max_duration < c.anomaly_min_duration)
    throw Error(ErrorCode::invalid_argument, "bad random anomaly ranges");
  for (std::size_t i = 0; i < c.anomalies.size(); ++i) {
    const auto& a = c.anomalies[i];
    const auto name = "anomaly " + std::to_string(i);
    if (a.intensity < 0.0 || a.intensity > 1.0) throw Error(ErrorCode::out_of_range, name + ": intensity outside [0,1]");
    if (a.width < 1 || a.height < 1 || a.duration < 0 || a.entry_frame < 0 || a.entry_frame >= c.num_frames)
      throw Error(ErrorCode::invalid_argument, name + ": bad size, duration or entry frame");
    const int last = detail::anomaly_last_frame(a, c.num_frames);
    for (int t : {a.entry_frame, last}) {
      const auto b = detail::anomaly_box(a, t);
      if (b.x_min < 0 || b.y_min < 0 || b.x_max > c.width || b.y_max > c.height)
        throw Error(ErrorCode::out_of_range, name + " leaves the frame at frame " + std::to_string(t));
    }
  }
}

/// Deterministic for a given config: same seed, bit-identical frames.
inline SyntheticSequence generate_synthetic(const SyntheticConfig& cfg) {
  validate_synthetic_config(cfg);
  std::mt19937_64 rng(cfg.seed);
  SwellField field(cfg, rng);
  SyntheticSequence out;
  out.anomalies = cfg.anomalies;

  // drawn anomalies: bright or dark, trajectory inside the frame
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < cfg.random_anomalies; ++i) {
    SyntheticAnomaly a;
    std::uniform_int_distribution<int> size(cfg.anomaly_min_size, cfg.anomaly_max_size);
    a.width = size(rng);
    a.height = size(rng);
    const int longest = std::min(cfg.anomaly_max_duration, cfg.num_frames);
    a.duration = std::uniform_int_distribution<int>(std::min(cfg.anomaly_min_duration, longest), longest)(rng);
    a.entry_frame = std::uniform_int_distribution<int>(0, cfg.num_frames - a.duration)(rng);
    a.vx = (2.0 * unit(rng) - 1.0) * cfg.anomaly_max_speed;
    a.vy = (2.0 * unit(rng) - 1.0) * cfg.anomaly_max_speed;
    const double travel_x = a.vx * (a.duration - 1);
    const double travel_y = a.vy * (a.duration - 1);
    const double x_lo = std::max(0.0, -travel_x), x_hi = cfg.width - a.width - std::max(0.0, travel_x);
    const double y_lo = std::max(0.0, -travel_y), y_hi = cfg.height - a.height - std::max(0.0, travel_y);
    if (x_hi < x_lo + 1 || y_hi < y_lo + 1) {
      a.vx = a.vy = 0.0;
      a.x = std::floor(unit(rng) * (cfg.width - a.width));
      a.y = std::floor(unit(rng) * (cfg.height - a.height));
    } else {
      a.x = std::floor(x_lo + unit(rng) * (x_hi - x_lo - 1)) + 0.5;
      a.y = std::floor(y_lo + unit(rng) * (y_hi - y_lo - 1)) + 0.5;
    }
    const double swing = cfg.luminance_drift + cfg.wave_amplitude;
    const double c = cfg.anomaly_min_contrast + (cfg.anomaly_max_contrast - cfg.anomaly_min_contrast) * unit(rng);
    const bool bright = unit(rng) < cfg.anomaly_bright_fraction;
    const double shade = cfg.shadows > 0 ? cfg.shadow_depth : 0.0;
    a.intensity = std::clamp(bright ? cfg.base_level + swing + c : cfg.base_level - swing - shade - c, 0.0, 1.0);
    out.anomalies.push_back(a);
  }
  SyntheticConfig checked = cfg;
  checked.anomalies = out.anomalies;
  validate_synthetic_config(checked);

  // contrast against the noise-free local background on every live frame
  for (std::size_t i = 0; i < out.anomalies.size(); ++i) {
    const auto& a = out.anomalies[i];
    for (int t = a.entry_frame; t <= detail::anomaly_last_frame(a, cfg.num_frames); ++t) {
      const double bg = field.box_mean(t, detail::anomaly_box(a, t));
      if (std::fabs(a.intensity - bg) < cfg.min_contrast)
        throw Error(ErrorCode::invalid_argument, "anomaly " + std::to_string(i) + " contrast below " +
                                                     std::to_string(cfg.min_contrast) + " at frame " +
                                                     std::to_string(t));
    }
  }

  std::optional<HorizonLine> horizon;
  std::vector<std::uint8_t> sky;
  if (cfg.telemetry) {
    horizon = horizon_line(cfg.camera, cfg.width, cfg.height);
    if (horizon->state != HorizonState::above_frame) sky = horizon_mask(*horizon, cfg.width, cfg.height);
  }

  const double tint[3] = {0.75, 0.9, 1.0};
  std::normal_distribution<double> noise(0.0, 1.0);
  std::poisson_distribution<int> glint_count(cfg.transient_glints > 0 ? cfg.transient_glints : 1.0);
  std::vector<double> lum;
  out.frames.reserve(static_cast<std::size_t>(cfg.num_frames));
  for (int t = 0; t < cfg.num_frames; ++t) {
    Frame f(cfg.width, cfg.height, 3, 0.0f, cfg.first_index + static_cast<std::size_t>(t));
    for (int y = 0; y < cfg.height; ++y) {
      field.row(t, y, lum);
      for (int x = 0; x < cfg.width; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * cfg.width + x;
        const bool is_sky = !sky.empty() && sky[p];
        for (int c = 0; c < 3; ++c) {
          const double v = is_sky ? cfg.sky_level * (0.9 + 0.1 * tint[c]) : lum[static_cast<std::size_t>(x)] * tint[c];
          f.data[p * 3 + static_cast<std::size_t>(c)] = static_cast<float>(v);
        }
      }
    }
    const int glints = cfg.transient_glints > 0 ? glint_count(rng) : 0;
    auto speckle = [&](int gx, int gy) {
      const int gs = std::uniform_int_distribution<int>(cfg.glint_min_size, cfg.glint_size)(rng);
      for (int y = std::max(0, gy); y < std::min(cfg.height, gy + gs); ++y)
        for (int x = std::max(0, gx); x < std::min(cfg.width, gx + gs); ++x)
          for (int c = 0; c < 3; ++c) f.at(x, y, c) = static_cast<float>(cfg.glint_intensity);
    };
    for (int g = 0; g < glints; ++g) {
      const int gx = std::uniform_int_distribution<int>(0, cfg.width - 1)(rng);
      const int gy = std::uniform_int_distribution<int>(0, cfg.height - 1)(rng);
      const int r = cfg.glint_patch_radius;
      if (r == 0) {
        speckle(gx, gy);
        continue;
      }
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (dx * dx + dy * dy <= r * r && unit(rng) < cfg.glint_density / (cfg.glint_min_size * cfg.glint_min_size))
            speckle(gx + dx, gy + dy);
    }
    auto& boxes = out.gt[f.index];
    for (const auto& a : out.anomalies) {
      if (t < a.entry_frame || t > detail::anomaly_last_frame(a, cfg.num_frames)) continue;
      const auto b = detail::anomaly_box(a, t);
      for (int y = b.y_min; y < b.y_max; ++y)
        for (int x = b.x_min; x < b.x_max; ++x)
          for (int c = 0; c < 3; ++c) f.at(x, y, c) = static_cast<float>(a.intensity);
      boxes.push_back(b);
    }
    if (boxes.empty()) out.gt.erase(f.index);
    if (cfg.noise_sigma > 0)
      for (auto& v : f.data) v += static_cast<float>(cfg.noise_sigma * noise(rng));
    quantize_8bit(f);
    if (cfg.telemetry) f.telemetry = cfg.camera;
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace roiprop
