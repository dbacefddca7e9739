// Error-frame post-processing: local noise remover, horizon cutter, grid
// pooling, budgeted cell selection and region merging.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "roiprop/border_following.hpp"
#include "roiprop/core.hpp"

namespace roiprop {

// ---------------------------------------------------------------------------
// Local noise remover

/// Multiplies every pixel by its four axis neighbours, channel-wise, for the
/// given number of iterations. Each iteration reads only the previous one;
/// borders replicate the edge pixel.
inline ErrorFrame local_noise_remover(const ErrorFrame& err, int iterations = 3) {
  ErrorFrame cur = err;
  if (iterations <= 0 || err.width == 0 || err.height == 0) return cur;
  ErrorFrame next = err;
  const int w = err.width;
  const int h = err.height;
  const std::size_t c = static_cast<std::size_t>(err.channels);
  const std::size_t row = static_cast<std::size_t>(w) * c;
  for (int it = 0; it < iterations; ++it) {
    const double* src = cur.data.data();
    double* dst = next.data.data();
    for (int y = 0; y < h; ++y) {
      const double* r = src + static_cast<std::size_t>(y) * row;
      const double* up = src + static_cast<std::size_t>(y > 0 ? y - 1 : 0) * row;
      const double* down = src + static_cast<std::size_t>(y + 1 < h ? y + 1 : h - 1) * row;
      double* o = dst + static_cast<std::size_t>(y) * row;
      if (w == 1) {
        for (std::size_t k = 0; k < c; ++k) o[k] = r[k] * r[k] * r[k] * up[k] * down[k];
        continue;
      }
      // replicated edge: the missing neighbour is the pixel itself
      for (std::size_t k = 0; k < c; ++k) {
        o[k] = r[k] * r[k] * r[k + c] * up[k] * down[k];
        const std::size_t j = row - c + k;
        o[j] = r[j] * r[j - c] * r[j] * up[j] * down[j];
      }
      for (std::size_t j = c; j + c < row; ++j) o[j] = r[j] * r[j - c] * r[j + c] * up[j] * down[j];
    }
    std::swap(cur.data, next.data);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Horizon cutter

enum class HorizonState {
  visible,       // line crosses the frame
  above_frame,   // whole frame shows water: nothing to mask
  below_frame,   // whole frame shows sky: mask everything
};

/// Horizon line as signed vertical offsets from the image centre row at the
/// left and right frame edges. Negative offsets lie above the centre.
struct HorizonLine {
  double offset_left = 0.0;
  double offset_right = 0.0;
  HorizonState state = HorizonState::visible;

  bool valid() const { return state == HorizonState::visible; }
};

inline constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Distance to the horizon in kilometres for an observer h metres above the sea.
inline double horizon_distance_km(double altitude_m) { return 3.57 * std::sqrt(altitude_m); }

/// Dip angle of the horizon below the horizontal, in degrees.
/// The distance is converted to metres before the ratio: asin(sqrt(h) / 3570).
inline double horizon_dip_deg(double altitude_m) {
  if (altitude_m <= 0.0) return 0.0;
  const double d_m = horizon_distance_km(altitude_m) * 1000.0;
  return std::asin(std::min(1.0, altitude_m / d_m)) / kDegToRad;
}

/// Untruncated offset of the horizon from the centre row, in pixels.
inline double horizon_center_offset(double altitude_m, double pitch_deg, double focal_px) {
  const double diff = horizon_dip_deg(altitude_m) - pitch_deg;
  const double mag = std::fabs(diff);
  if (mag >= 90.0) return diff > 0 ? INFINITY : -INFINITY;
  const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
  return std::tan(mag * kDegToRad) * focal_px * sign;
}

inline HorizonLine horizon_line(const Telemetry& t, int frame_width, int frame_height) {
  if (!t.valid()) throw Error(ErrorCode::invalid_argument, "telemetry needs altitude >= 0 and focal > 0");
  if (std::fabs(t.roll_deg) >= 90.0) throw Error(ErrorCode::invalid_argument, "degenerate roll angle");
  const double o = horizon_center_offset(t.altitude_m, t.gimbal_pitch_deg, t.focal_px);
  const double roll = std::tan(t.roll_deg * kDegToRad) * frame_width / 2.0;
  double left = o + roll;
  double right = o - roll;
  const double half = frame_height / 2.0;
  HorizonLine line;
  if (left <= -half && right <= -half)
    line.state = HorizonState::above_frame;
  else if (left >= half && right >= half)
    line.state = HorizonState::below_frame;
  line.offset_left = std::clamp(left, -half, half);
  line.offset_right = std::clamp(right, -half, half);
  return line;
}

/// Per-pixel mask (1 = above the horizon, i.e. sky) for a frame.
inline std::vector<std::uint8_t> horizon_mask(const HorizonLine& line, int width, int height) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  if (line.state == HorizonState::above_frame) return mask;
  if (line.state == HorizonState::below_frame) {
    std::fill(mask.begin(), mask.end(), 1);
    return mask;
  }
  const double center = height / 2.0;
  for (int x = 0; x < width; ++x) {
    // line through (0, c + left) and (width, c + right), sampled at pixel centres
    const double t = (x + 0.5) / width;
    const double y_line = center + line.offset_left + t * (line.offset_right - line.offset_left);
    for (int y = 0; y < height; ++y)
      if (y + 0.5 < y_line) mask[static_cast<std::size_t>(y) * width + x] = 1;
  }
  return mask;
}

/// Zeroes every error pixel above the horizon.
inline ErrorFrame apply_horizon_mask(const ErrorFrame& err, const HorizonLine& line) {
  ErrorFrame out = err;
  if (line.state == HorizonState::above_frame) return out;
  const auto mask = horizon_mask(line, err.width, err.height);
  const std::size_t c = static_cast<std::size_t>(err.channels);
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i])
      for (std::size_t k = 0; k < c; ++k) out.data[i * c + k] = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Grid pooling and selection

struct CellScores {
  GridSpec grid;
  int frame_width = 0;
  int frame_height = 0;
  int cell_width = 0;   // nominal; the last column absorbs the remainder
  int cell_height = 0;  // nominal; the last row absorbs the remainder
  std::vector<double> scores;        // rows * columns, row-major
  std::vector<std::uint8_t> masked;  // 1 = excluded from selection

  double score(int col, int row) const { return scores[static_cast<std::size_t>(row) * grid.columns + col]; }

  BoundingBox cell_box(int col, int row) const {
    BoundingBox b;
    b.x_min = col * cell_width;
    b.y_min = row * cell_height;
    b.x_max = col + 1 == grid.columns ? frame_width : (col + 1) * cell_width;
    b.y_max = row + 1 == grid.rows ? frame_height : (row + 1) * cell_height;
    return b;
  }
  BoundingBox cell_box(int index) const { return cell_box(index % grid.columns, index / grid.columns); }
};

/// Mean channel-averaged error per grid cell. Cells lying entirely in the
/// pixel mask (when given) are flagged and scored 0.
inline CellScores grid_pool(const ErrorFrame& err, const GridSpec& grid,
                            const std::vector<std::uint8_t>* excluded_pixels = nullptr) {
  check_grid(grid, err.width, err.height);
  CellScores out;
  out.grid = grid;
  out.frame_width = err.width;
  out.frame_height = err.height;
  out.cell_width = err.width / grid.columns;
  out.cell_height = err.height / grid.rows;
  const std::size_t n = static_cast<std::size_t>(grid.cell_count());
  std::vector<double> sums(n, 0.0);
  std::vector<std::int64_t> excluded(n, 0);
  const std::size_t c = static_cast<std::size_t>(err.channels);
  const double inv_c = 1.0 / static_cast<double>(c);
  for (int y = 0; y < err.height; ++y) {
    const int row = std::min(y / out.cell_height, grid.rows - 1);
    const double* r = err.data.data() + static_cast<std::size_t>(y) * err.width * c;
    for (int x = 0; x < err.width; ++x) {
      const int col = std::min(x / out.cell_width, grid.columns - 1);
      const std::size_t cell = static_cast<std::size_t>(row) * grid.columns + col;
      double s = 0.0;
      for (std::size_t k = 0; k < c; ++k) s += r[static_cast<std::size_t>(x) * c + k];
      sums[cell] += s * inv_c;
      if (excluded_pixels && (*excluded_pixels)[static_cast<std::size_t>(y) * err.width + x]) ++excluded[cell];
    }
  }
  out.scores.resize(n);
  out.masked.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto box = out.cell_box(static_cast<int>(i));
    const auto area = box_area(box);
    if (excluded[i] == area) {
      out.masked[i] = 1;
      out.scores[i] = 0.0;
    } else {
      out.scores[i] = sums[i] / static_cast<double>(area);
    }
  }
  return out;
}

/// Cell indices ordered by descending score, ties by row-major index.
inline std::vector<int> ranked_cells(const CellScores& scores) {
  std::vector<int> order;
  order.reserve(scores.scores.size());
  for (std::size_t i = 0; i < scores.scores.size(); ++i)
    if (!scores.masked[i]) order.push_back(static_cast<int>(i));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = scores.scores[static_cast<std::size_t>(a)];
    const double sb = scores.scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return order;
}

/// Top ceil(p * cells) unmasked cells, each emitted as one scored box in rank order.
inline RegionSet select_regions(const CellScores& scores, double budget_p, std::size_t frame_index = 0) {
  const int k = budget_cells(budget_p, scores.grid);
  const auto order = ranked_cells(scores);
  RegionSet out;
  out.frame_index = frame_index;
  out.budget_p = budget_p;
  out.frame_width = scores.frame_width;
  out.frame_height = scores.frame_height;
  const std::size_t take = std::min(order.size(), static_cast<std::size_t>(k));
  out.regions.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    auto box = scores.cell_box(order[i]);
    box.score = scores.scores[static_cast<std::size_t>(order[i])];
    out.regions.push_back(box);
  }
  return out;
}

/// Row-major binary cell mask of the cells a region set covers.
inline std::vector<std::uint8_t> selection_mask(const RegionSet& selected, const CellScores& scores) {
  std::vector<std::uint8_t> mask(scores.scores.size(), 0);
  for (const auto& r : selected.regions) {
    const int col = std::min(r.x_min / scores.cell_width, scores.grid.columns - 1);
    const int row = std::min(r.y_min / scores.cell_height, scores.grid.rows - 1);
    if (scores.cell_box(col, row) != BoundingBox{r.x_min, r.y_min, r.x_max, r.y_max, std::nullopt})
      throw Error(ErrorCode::invalid_argument, "region does not match a grid cell");
    mask[static_cast<std::size_t>(row) * scores.grid.columns + col] = 1;
  }
  return mask;
}

struct CellComponent {
  std::vector<int> cells;  // row-major cell indices
  BoundingBox box;         // pixel bounding box, score = mean cell score
};

/// 8-connected components of a cell mask, found by border following.
inline std::vector<CellComponent> cell_components(const std::vector<std::uint8_t>& mask, const CellScores& scores) {
  const auto tracing = follow_borders(mask, scores.grid.columns, scores.grid.rows);
  std::vector<CellComponent> comps(static_cast<std::size_t>(tracing.component_count));
  for (std::size_t i = 0; i < tracing.labels.size(); ++i)
    if (tracing.labels[i] >= 0) comps[static_cast<std::size_t>(tracing.labels[i])].cells.push_back(static_cast<int>(i));
  for (auto& comp : comps) {
    BoundingBox box{scores.frame_width, scores.frame_height, 0, 0, std::nullopt};
    double sum = 0.0;
    for (int cell : comp.cells) {
      const auto cb = scores.cell_box(cell);
      box.x_min = std::min(box.x_min, cb.x_min);
      box.y_min = std::min(box.y_min, cb.y_min);
      box.x_max = std::max(box.x_max, cb.x_max);
      box.y_max = std::max(box.y_max, cb.y_max);
      sum += scores.scores[static_cast<std::size_t>(cell)];
    }
    box.score = sum / static_cast<double>(comp.cells.size());
    comp.box = box;
  }
  return comps;
}

/// Merges corner- or edge-touching selected cells into their bounding boxes,
/// ranks boxes by mean cell score and drops the lowest-ranked ones until the
/// total area fits the budget. If even the best box alone exceeds the budget,
/// it is replaced by its own highest-scoring cells up to the budget.
inline RegionSet merge_regions(const RegionSet& selected, const CellScores& scores, double budget_p) {
  if (selected.regions.empty()) throw Error(ErrorCode::invalid_argument, "nothing selected to merge");
  const auto mask = selection_mask(selected, scores);
  auto comps = cell_components(mask, scores);
  std::stable_sort(comps.begin(), comps.end(), [](const CellComponent& a, const CellComponent& b) {
    const double sa = *a.box.score;
    const double sb = *b.box.score;
    if (sa != sb) return sa > sb;
    return a.cells.front() < b.cells.front();
  });
  const std::int64_t budget = budget_area(budget_p, scores.grid, scores.frame_width, scores.frame_height);

  RegionSet out;
  out.frame_index = selected.frame_index;
  out.budget_p = budget_p;
  out.frame_width = scores.frame_width;
  out.frame_height = scores.frame_height;
  std::int64_t total = 0;
  for (const auto& c : comps) {
    out.regions.push_back(c.box);
    total += box_area(c.box);
  }
  while (out.regions.size() > 1 && total > budget) {
    total -= box_area(out.regions.back());
    out.regions.pop_back();
  }
  if (total > budget) {
    std::vector<int> cells = comps.front().cells;
    std::stable_sort(cells.begin(), cells.end(), [&](int a, int b) {
      return scores.scores[static_cast<std::size_t>(a)] > scores.scores[static_cast<std::size_t>(b)];
    });
    out.regions.clear();
    total = 0;
    for (int cell : cells) {
      auto box = scores.cell_box(cell);
      if (total + box_area(box) > budget) break;
      box.score = scores.scores[static_cast<std::size_t>(cell)];
      total += box_area(box);
      out.regions.push_back(box);
    }
  }
  return out;
}

}  // namespace roiprop
