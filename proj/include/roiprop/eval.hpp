// Recall-at-bandwidth metrics and reconstruction-error statistics.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roiprop/core.hpp"

namespace roiprop {

enum class OverlapMode { coverage, iou };

/// Fraction of the ground-truth box covered by the union of the regions.
inline double coverage(const BoundingBox& gt, const std::vector<BoundingBox>& regions) {
  const auto gt_area = box_area(gt);
  if (gt_area <= 0) return 0.0;
  std::vector<BoundingBox> clipped;
  for (const auto& r : regions) {
    BoundingBox c{std::max(gt.x_min, r.x_min), std::max(gt.y_min, r.y_min), std::min(gt.x_max, r.x_max),
                  std::min(gt.y_max, r.y_max), std::nullopt};
    if (c.well_formed()) clipped.push_back(c);
  }
  if (clipped.empty()) return 0.0;
  // coordinate compression; exact union area
  std::vector<int> xs, ys;
  for (const auto& c : clipped) {
    xs.push_back(c.x_min);
    xs.push_back(c.x_max);
    ys.push_back(c.y_min);
    ys.push_back(c.y_max);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  const std::size_t nx = xs.size() - 1;
  const std::size_t ny = ys.size() - 1;
  std::vector<std::uint8_t> covered(nx * ny, 0);
  for (const auto& c : clipped) {
    const auto x0 = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), c.x_min) - xs.begin());
    const auto x1 = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), c.x_max) - xs.begin());
    const auto y0 = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), c.y_min) - ys.begin());
    const auto y1 = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), c.y_max) - ys.begin());
    for (std::size_t y = y0; y < y1; ++y)
      for (std::size_t x = x0; x < x1; ++x) covered[y * nx + x] = 1;
  }
  std::int64_t area = 0;
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x)
      if (covered[y * nx + x])
        area += static_cast<std::int64_t>(xs[x + 1] - xs[x]) * (ys[y + 1] - ys[y]);
  return static_cast<double>(area) / static_cast<double>(gt_area);
}

/// Best intersection-over-union of the ground-truth box with any single region.
inline double best_iou(const BoundingBox& gt, const std::vector<BoundingBox>& regions) {
  double best = 0.0;
  for (const auto& r : regions) {
    const auto inter = intersection_area(gt, r);
    if (inter == 0) continue;
    const auto uni = box_area(gt) + box_area(r) - inter;
    best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
  }
  return best;
}

inline double overlap(const BoundingBox& gt, const std::vector<BoundingBox>& regions, OverlapMode mode) {
  return mode == OverlapMode::coverage ? coverage(gt, regions) : best_iou(gt, regions);
}

struct RecallOptions {
  OverlapMode mode = OverlapMode::coverage;
  double threshold = 0.5;
  GridSpec grid{};
  bool strict_budget = true;  // throw on budget violations instead of counting them
};

struct RecallResult {
  double recall = 0.0;
  std::size_t hits = 0;
  std::size_t total = 0;
  std::size_t budget_violations = 0;
  double mean_boxes = 0.0;
};

using Predictions = std::map<std::size_t, RegionSet>;  // keyed by frame index

inline bool exceeds_budget(const RegionSet& rs, const GridSpec& grid) {
  if (rs.frame_width <= 0 || rs.frame_height <= 0) return false;
  return rs.total_area() > budget_area(rs.budget_p, grid, rs.frame_width, rs.frame_height);
}

/// Ground-truth boxes whose overlap with the frame's regions reaches the
/// threshold, over all boxes of all frames. Frames without boxes add nothing.
inline RecallResult recall_at_p(const Predictions& predictions, const GroundTruth& gt, const RecallOptions& opt = {}) {
  RecallResult r;
  std::size_t box_count = 0;
  for (const auto& [frame, rs] : predictions) {
    box_count += rs.regions.size();
    if (exceeds_budget(rs, opt.grid)) {
      if (opt.strict_budget)
        throw Error(ErrorCode::budget_violation, "frame " + std::to_string(frame) + " transmits " +
                                                     std::to_string(rs.total_area()) + " px at p=" +
                                                     std::to_string(rs.budget_p));
      ++r.budget_violations;
    }
  }
  if (!predictions.empty()) r.mean_boxes = static_cast<double>(box_count) / static_cast<double>(predictions.size());
  for (const auto& [frame, boxes] : gt) {
    if (boxes.empty()) continue;
    const auto it = predictions.find(frame);
    if (it == predictions.end() && !predictions.empty())
      throw Error(ErrorCode::invalid_argument, "no prediction for frame " + std::to_string(frame));
    for (const auto& box : boxes) {
      ++r.total;
      if (it != predictions.end() && overlap(box, it->second.regions, opt.mode) >= opt.threshold) ++r.hits;
    }
  }
  r.recall = r.total ? static_cast<double>(r.hits) / static_cast<double>(r.total) : 0.0;
  return r;
}

/// The ten budgets 0.05, 0.15, ..., 0.95.
inline std::vector<double> standard_budgets() {
  std::vector<double> ps;
  for (int i = 0; i < 10; ++i) ps.push_back((2 * i + 1) / 20.0);
  return ps;
}

inline std::optional<double> find_budget(const std::map<double, double>& recalls, double p) {
  for (const auto& [k, v] : recalls)
    if (std::fabs(k - p) < 1e-9) return v;
  return std::nullopt;
}

inline double average_recall(const std::map<double, double>& recalls) {
  double sum = 0.0;
  for (double p : standard_budgets()) {
    const auto v = find_budget(recalls, p);
    if (!v) throw Error(ErrorCode::invalid_argument, "average recall needs p=" + std::to_string(p));
    sum += *v;
  }
  return sum / 10.0;
}

/// Pixel-weighted accumulator for error inside and outside ground-truth boxes.
struct ReconStats {
  double sum_in = 0.0;
  std::int64_t pixels_in = 0;
  double sum_out = 0.0;
  std::int64_t pixels_out = 0;

  void add(const ReconStats& o) {
    sum_in += o.sum_in;
    pixels_in += o.pixels_in;
    sum_out += o.sum_out;
    pixels_out += o.pixels_out;
  }
  std::optional<double> err_b() const {
    return pixels_in ? std::optional<double>(sum_in / static_cast<double>(pixels_in)) : std::nullopt;
  }
  std::optional<double> err_r() const {
    return pixels_out ? std::optional<double>(sum_out / static_cast<double>(pixels_out)) : std::nullopt;
  }
  std::optional<double> delta_r() const {
    const auto b = err_b();
    const auto r = err_r();
    if (!b || !r) return std::nullopt;
    return *b - *r;
  }
};

/// Channel-mean error summed inside any gt box and over the remaining pixels.
inline ReconStats recon_error_stats(const ErrorFrame& err, const std::vector<BoundingBox>& boxes) {
  std::vector<std::uint8_t> inside(err.pixel_count(), 0);
  for (auto b : boxes) {
    b = clamp_box(b, err.width, err.height);
    for (int y = b.y_min; y < b.y_max; ++y)
      for (int x = b.x_min; x < b.x_max; ++x) inside[static_cast<std::size_t>(y) * err.width + x] = 1;
  }
  const auto mean = err.channel_mean();
  ReconStats s;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (inside[i]) {
      s.sum_in += mean[i];
      ++s.pixels_in;
    } else {
      s.sum_out += mean[i];
      ++s.pixels_out;
    }
  }
  return s;
}

struct EvalReport {
  std::map<double, double> recalls;
  std::map<double, double> mean_boxes_per_p;
  std::optional<double> ar;
  std::optional<double> err_b;
  std::optional<double> err_r;
  std::optional<double> delta_r;
  double mean_boxes = 0.0;
  std::size_t budget_violations = 0;
  std::size_t gt_boxes = 0;
};

/// Evaluates prediction sets grouped by budget.
inline EvalReport evaluate(const std::map<double, Predictions>& by_budget, const GroundTruth& gt,
                           const RecallOptions& opt = {}, const std::optional<ReconStats>& recon = std::nullopt) {
  EvalReport rep;
  double boxes = 0.0;
  std::size_t frames = 0;
  for (const auto& [p, preds] : by_budget) {
    const auto r = recall_at_p(preds, gt, opt);
    rep.recalls[p] = r.recall;
    rep.mean_boxes_per_p[p] = r.mean_boxes;
    rep.budget_violations += r.budget_violations;
    rep.gt_boxes = r.total;
    boxes += r.mean_boxes * static_cast<double>(preds.size());
    frames += preds.size();
  }
  rep.mean_boxes = frames ? boxes / static_cast<double>(frames) : 0.0;
  bool complete = true;
  for (double p : standard_budgets()) complete = complete && find_budget(rep.recalls, p).has_value();
  if (complete) rep.ar = average_recall(rep.recalls);
  if (recon) {
    rep.err_b = recon->err_b();
    rep.err_r = recon->err_r();
    rep.delta_r = recon->delta_r();
  }
  return rep;
}

inline nlohmann::json to_json(const EvalReport& rep) {
  nlohmann::json j;
  auto rows = nlohmann::json::array();
  for (const auto& [p, r] : rep.recalls)
    rows.push_back({{"p", p}, {"recall", r}, {"mean_boxes", rep.mean_boxes_per_p.at(p)}});
  j["recalls"] = rows;
  j["ar"] = rep.ar ? nlohmann::json(*rep.ar) : nlohmann::json(nullptr);
  j["err_b"] = rep.err_b ? nlohmann::json(*rep.err_b) : nlohmann::json(nullptr);
  j["err_r"] = rep.err_r ? nlohmann::json(*rep.err_r) : nlohmann::json(nullptr);
  j["delta_r"] = rep.delta_r ? nlohmann::json(*rep.delta_r) : nlohmann::json(nullptr);
  j["mean_boxes"] = rep.mean_boxes;
  j["budget_violations"] = rep.budget_violations;
  j["gt_boxes"] = rep.gt_boxes;
  return j;
}

/// Area-recall curve: "p,recall" rows in ascending p, then an AR row when all ten budgets exist.
inline std::string to_csv(const EvalReport& rep) {
  std::ostringstream os;
  os.precision(17);
  os << "p,recall\n";
  for (const auto& [p, r] : rep.recalls) os << p << ',' << r << '\n';
  if (rep.ar) os << "AR," << *rep.ar << '\n';
  return os.str();
}

}  // namespace roiprop
