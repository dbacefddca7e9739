// Frame-by-frame region proposal: error source (autoencoder or a
// background-subtraction baseline), frame momentum, local noise remover,
// horizon exclusion, grid pooling and top-k selection.
#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "roiprop/autoencoder.hpp"
#include "roiprop/baselines.hpp"
#include "roiprop/core.hpp"
#include "roiprop/data.hpp"
#include "roiprop/eval.hpp"
#include "roiprop/postprocess.hpp"
#include "roiprop/temporal.hpp"

namespace roiprop {

enum class Method { autoencoder, mean_filter, frame_differencing, gmm };

inline Method parse_method(const std::string& s) {
  if (s == "auto") return Method::autoencoder;
  if (s == "mf") return Method::mean_filter;
  if (s == "fd") return Method::frame_differencing;
  if (s == "gmm") return Method::gmm;
  throw Error(ErrorCode::invalid_argument, "unknown method '" + s + "' (auto, mf, fd, gmm)");
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::autoencoder: return "auto";
    case Method::mean_filter: return "mf";
    case Method::frame_differencing: return "fd";
    case Method::gmm: return "gmm";
  }
  return "?";
}

struct PipelineConfig {
  Method method = Method::autoencoder;
  std::string model_path;
  GridSpec grid{48, 27};
  std::vector<double> budgets{0.05};
  int momentum = 2;
  int lnr_iterations = 3;
  bool horizon = true;
  bool merge = false;
  OverlapMode overlap = OverlapMode::coverage;
  std::uint64_t seed = 0;
  int mean_filter_window = 50;
  GmmParams gmm{};
};

struct StageTimes {
  double model = 0.0;  // error source (network forward or baseline update), ms
  double momentum = 0.0;
  double lnr = 0.0;
  double grid = 0.0;    // horizon mask and pooling
  double select = 0.0;  // selection and merging for every budget
  double total = 0.0;
};

struct FrameResult {
  std::size_t frame_index = 0;
  bool warmup = false;     // no prediction yet; the error frame is all zero
  ErrorFrame raw_error;    // before momentum and noise removal
  std::vector<RegionSet> regions;  // one per budget, in config order
  StageTimes times;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg, std::optional<Model> model = std::nullopt)
      : cfg_(std::move(cfg)),
        model_(std::move(model)),
        history_size_(model_ ? static_cast<std::size_t>(model_->config.n_input_frames) : 1),
        errors_(static_cast<std::size_t>(std::max(1, cfg_.momentum))) {
    if (cfg_.momentum < 1) throw Error(ErrorCode::invalid_argument, "momentum must be >= 1");
    if (cfg_.lnr_iterations < 0) throw Error(ErrorCode::invalid_argument, "LNR iterations must be >= 0");
    if (cfg_.budgets.empty()) throw Error(ErrorCode::invalid_argument, "no budget given");
    for (double p : cfg_.budgets)
      if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::out_of_range, "budget must lie in (0, 1]");
    if (cfg_.method == Method::autoencoder && !model_)
      throw Error(ErrorCode::invalid_argument, "method auto needs a model");
    mf_.window = cfg_.mean_filter_window;
    gmm_.params = cfg_.gmm;
  }

  const PipelineConfig& config() const { return cfg_; }

  FrameResult process(const Frame& frame) {
    using clock = std::chrono::steady_clock;
    auto ms = [](clock::time_point a, clock::time_point b) {
      return std::chrono::duration<double, std::milli>(b - a).count();
    };
    require_valid(frame);
    if (frame.channels != 3) throw Error(ErrorCode::invalid_argument, "frames must be RGB");
    if (shape_ && !frame.same_shape(shape_->width, shape_->height, 3))
      throw Error(ErrorCode::dimension_mismatch, "frame " + std::to_string(frame.index) + " changes size");
    if (!shape_) {
      check_grid(cfg_.grid, frame.width, frame.height);
      if (model_) check_model_fits(frame);
      shape_ = Shape{frame.width, frame.height};
    }

    FrameResult res;
    res.frame_index = frame.index;
    const auto t0 = clock::now();
    res.raw_error = source_error(frame, res.warmup);
    const auto t1 = clock::now();

    ErrorFrame err;
    if (res.warmup) {
      err = res.raw_error;
    } else {
      errors_.push(res.raw_error);
      err = momentum_average(errors_);
    }
    const auto t2 = clock::now();
    if (cfg_.lnr_iterations > 0 && !res.warmup) err = local_noise_remover(err, cfg_.lnr_iterations);
    const auto t3 = clock::now();

    std::vector<std::uint8_t> sky;
    if (cfg_.horizon && frame.telemetry) {
      const auto line = horizon_line(*frame.telemetry, frame.width, frame.height);
      if (line.state != HorizonState::above_frame) {
        sky = horizon_mask(line, frame.width, frame.height);
        err = apply_horizon_mask(err, line);
      }
    }
    const auto scores = grid_pool(err, cfg_.grid, sky.empty() ? nullptr : &sky);
    const auto t4 = clock::now();
    for (double p : cfg_.budgets) {
      auto selected = select_regions(scores, p, frame.index);
      res.regions.push_back(cfg_.merge ? merge_regions(selected, scores, p) : std::move(selected));
    }
    const auto t5 = clock::now();
    res.times = {ms(t0, t1), ms(t1, t2), ms(t2, t3), ms(t3, t4), ms(t4, t5), ms(t0, t5)};
    return res;
  }

 private:
  struct Shape {
    int width;
    int height;
  };

  void check_model_fits(const Frame& f) const {
    const auto& mc = model_->config;
    if (mc.input_width != padded_extent(f.width, mc.num_layers) ||
        mc.input_height != padded_extent(f.height, mc.num_layers))
      throw Error(ErrorCode::config_mismatch,
                  "model input " + std::to_string(mc.input_width) + "x" + std::to_string(mc.input_height) +
                      " does not fit frames of " + std::to_string(f.width) + "x" + std::to_string(f.height));
  }

  // Contiguous so the model can read it as a span.
  void remember(const Frame& frame) {
    if (!history_.empty() && frame.index <= history_.back().index)
      throw Error(ErrorCode::invalid_argument, "frame indices must increase");
    if (history_.size() == history_size_) history_.erase(history_.begin());
    history_.push_back(frame);
  }

  ErrorFrame source_error(const Frame& frame, bool& warmup) {
    switch (cfg_.method) {
      case Method::autoencoder: {
        warmup = history_.size() < history_size_;
        ErrorFrame e;
        if (warmup) {
          e = ErrorFrame(frame.width, frame.height, 3, 0.0, frame.index);
        } else {
          e = error_frame(forward(*model_, std::span<const Frame>(history_)), frame);
          e.source_frame_index = frame.index;
        }
        remember(frame);
        return e;
      }
      case Method::mean_filter:
        warmup = !mf_.mean.has_value();
        return mean_filter_step(mf_, frame);
      case Method::frame_differencing: {
        warmup = history_.empty();
        ErrorFrame e = warmup ? ErrorFrame(frame.width, frame.height, 3, 0.0, frame.index)
                              : frame_differencing_step(history_.back(), frame);
        remember(frame);
        return e;
      }
      case Method::gmm:
        warmup = gmm_.pixels.empty();
        return gmm_step(gmm_, frame);
    }
    throw Error(ErrorCode::invalid_argument, "unknown method");
  }

  PipelineConfig cfg_;
  std::optional<Model> model_;
  std::size_t history_size_;
  std::vector<Frame> history_;
  ErrorRing errors_;
  MeanFilterState mf_;
  GmmState gmm_;
  std::optional<Shape> shape_;
};

struct SequenceRun {
  std::vector<PredictionRecord> records;  // frame-major, budgets in config order
  ReconStats recon;                       // over non-warm-up frames
  std::vector<StageTimes> times;
};

/// Runs every frame through a fresh pipeline. Reconstruction statistics use
/// the raw error frame against `gt` (frames without boxes count as outside).
inline SequenceRun run_sequence(Pipeline& pipeline, const std::vector<Frame>& frames, const GroundTruth* gt = nullptr,
                                bool timing = false) {
  SequenceRun run;
  for (const auto& f : frames) {
    auto res = pipeline.process(f);
    std::optional<ReconStats> stats;
    if (gt && !res.warmup) {
      const auto it = gt->find(f.index);
      stats = recon_error_stats(res.raw_error, it == gt->end() ? std::vector<BoundingBox>{} : it->second);
      run.recon.add(*stats);
    }
    for (auto& rs : res.regions) {
      PredictionRecord rec{std::move(rs), std::nullopt, stats};
      if (timing) rec.ms = res.times.total;
      run.records.push_back(std::move(rec));
    }
    run.times.push_back(res.times);
  }
  return run;
}

/// Groups records by budget then frame, as eval expects.
inline std::map<double, Predictions> group_by_budget(const std::vector<PredictionRecord>& records) {
  std::map<double, Predictions> out;
  for (const auto& r : records) out[r.regions.budget_p][r.regions.frame_index] = r.regions;
  return out;
}

}  // namespace roiprop
