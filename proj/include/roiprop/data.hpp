// Sequence directories, telemetry, ground truth and prediction files.
//
// A sequence directory holds frames named by zero-padded index
// (000000.png, 000001.png, ... or .ppm), plus optional telemetry.jsonl,
// gt.json and sequence.json ({"fps": 30}).
#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roiprop/core.hpp"
#include "roiprop/eval.hpp"
#include "roiprop/image_io.hpp"

namespace roiprop {

namespace fs = std::filesystem;

struct SequenceManifest {
  fs::path directory;
  std::vector<fs::path> frame_files;  // ordered by index
  std::size_t first_index = 0;
  std::optional<fs::path> telemetry;
  std::optional<fs::path> ground_truth;
  double fps = 30.0;
};

inline std::string frame_file_name(std::size_t index, const std::string& ext = ".png") {
  std::string s = std::to_string(index);
  if (s.size() < 6) s.insert(0, 6 - s.size(), '0');
  return s + ext;
}

inline SequenceManifest scan_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "not a sequence directory: " + dir.string());
  std::vector<std::pair<std::size_t, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext != ".png" && ext != ".ppm") continue;
    const auto stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); }))
      continue;
    found.emplace_back(std::stoull(stem), entry.path());
  }
  if (found.empty()) throw Error(ErrorCode::io, "no frame files in " + dir.string());
  std::sort(found.begin(), found.end());
  SequenceManifest m;
  m.directory = dir;
  m.first_index = found.front().first;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (i > 0 && found[i].first == found[i - 1].first)
      throw Error(ErrorCode::parse, "duplicate frame index " + std::to_string(found[i].first));
    const std::size_t expected = m.first_index + i;
    if (found[i].first != expected)
      throw Error(ErrorCode::io, "missing frame " + std::to_string(expected) + " in " + dir.string());
    m.frame_files.push_back(found[i].second);
  }
  if (fs::exists(dir / "telemetry.jsonl")) m.telemetry = dir / "telemetry.jsonl";
  if (fs::exists(dir / "gt.json")) m.ground_truth = dir / "gt.json";
  if (fs::exists(dir / "sequence.json")) {
    try {
      const auto j = nlohmann::json::parse(detail::read_file((dir / "sequence.json").string()));
      m.fps = j.value("fps", 30.0);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "sequence.json: " + std::string(e.what()));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Telemetry (JSON lines)

inline std::map<std::size_t, Telemetry> read_telemetry(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::map<std::size_t, Telemetry> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Telemetry t;
      t.altitude_m = j.at("altitude_m").get<double>();
      t.gimbal_pitch_deg = j.at("gimbal_pitch_deg").get<double>();
      t.roll_deg = j.at("roll_deg").get<double>();
      t.focal_px = j.at("focal_px").get<double>();
      if (!t.valid()) throw Error(ErrorCode::out_of_range, "invalid telemetry values");
      rows[j.at("frame").get<std::size_t>()] = t;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

inline void write_telemetry(const std::vector<Frame>& frames, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& fr : frames) {
    if (!fr.telemetry) continue;
    const auto& t = *fr.telemetry;
    nlohmann::json j{{"frame", fr.index},
                     {"altitude_m", t.altitude_m},
                     {"gimbal_pitch_deg", t.gimbal_pitch_deg},
                     {"roll_deg", t.roll_deg},
                     {"focal_px", t.focal_px}};
    f << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Ground truth: {"<frame>": [[x_min, y_min, x_max, y_max], ...], ...}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j, int frame_width = 0, int frame_height = 0) {
  if (!j.is_object()) throw Error(ErrorCode::parse, "ground truth must be a JSON object");
  GroundTruth gt;
  for (const auto& [key, arr] : j.items()) {
    std::size_t frame = 0;
    try {
      std::size_t used = 0;
      frame = std::stoull(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, "ground-truth key is not a frame index: " + key);
    }
    auto& boxes = gt[frame];
    for (const auto& b : arr) {
      if (!b.is_array() || b.size() != 4) throw Error(ErrorCode::parse, "ground-truth box needs 4 numbers");
      BoundingBox box{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>(), std::nullopt};
      if (!box.well_formed())
        throw Error(ErrorCode::invalid_argument, "non-positive extent box in frame " + std::to_string(frame));
      if (frame_width > 0 && frame_height > 0) {
        box = clamp_box(box, frame_width, frame_height);
        if (!box.well_formed()) continue;
      }
      boxes.push_back(box);
    }
  }
  return gt;
}

inline GroundTruth parse_ground_truth(const fs::path& path, int frame_width = 0, int frame_height = 0) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path.string()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
  try {
    return ground_truth_from_json(j, frame_width, frame_height);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

inline nlohmann::json ground_truth_to_json(const GroundTruth& gt) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [frame, boxes] : gt) {
    auto arr = nlohmann::json::array();
    for (const auto& b : boxes) arr.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
    j[std::to_string(frame)] = arr;
  }
  return j;
}

inline void write_ground_truth(const GroundTruth& gt, const fs::path& path) {
  detail::write_file(path.string(), ground_truth_to_json(gt).dump() + "\n");
}

// ---------------------------------------------------------------------------
// Sequence loading

struct LoadedSequence {
  SequenceManifest manifest;
  std::vector<Frame> frames;
  GroundTruth gt;
};

/// Loads every frame in index order with telemetry joined by frame index.
inline LoadedSequence load_sequence(const SequenceManifest& m) {
  LoadedSequence seq;
  seq.manifest = m;
  std::map<std::size_t, Telemetry> telemetry;
  if (m.telemetry) {
    telemetry = read_telemetry(*m.telemetry);
    if (telemetry.size() != m.frame_files.size())
      throw Error(ErrorCode::parse, "telemetry has " + std::to_string(telemetry.size()) + " rows for " +
                                        std::to_string(m.frame_files.size()) + " frames");
  }
  seq.frames.reserve(m.frame_files.size());
  for (std::size_t i = 0; i < m.frame_files.size(); ++i) {
    Frame f = read_image(m.frame_files[i].string());
    f.index = m.first_index + i;
    if (!seq.frames.empty() && !seq.frames.front().same_shape(f))
      throw Error(ErrorCode::dimension_mismatch, m.frame_files[i].string() + " differs in size");
    if (m.telemetry) {
      const auto it = telemetry.find(f.index);
      if (it == telemetry.end()) throw Error(ErrorCode::parse, "telemetry gap at frame " + std::to_string(f.index));
      f.telemetry = it->second;
    }
    seq.frames.push_back(std::move(f));
  }
  if (m.ground_truth)
    seq.gt = parse_ground_truth(*m.ground_truth, seq.frames.front().width, seq.frames.front().height);
  return seq;
}

inline LoadedSequence load_sequence(const fs::path& dir) { return load_sequence(scan_sequence(dir)); }

/// Writes frames (PNG), telemetry and ground truth in sequence-directory layout.
inline void write_sequence(const fs::path& dir, const std::vector<Frame>& frames, const GroundTruth& gt,
                           double fps = 30.0, const std::string& ext = ".png") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& f : frames) write_image(f, (dir / frame_file_name(f.index, ext)).string());
  if (!frames.empty() && frames.front().telemetry) write_telemetry(frames, dir / "telemetry.jsonl");
  write_ground_truth(gt, dir / "gt.json");
  detail::write_file((dir / "sequence.json").string(), nlohmann::json{{"fps", fps}}.dump() + "\n");
}

// ---------------------------------------------------------------------------
// Predictions (JSON lines):
//   {"frame": i, "p": budget, "regions": [[x_min, y_min, x_max, y_max, score], ...]}
// Writers also add "width"/"height" and, optionally, "ms" and per-frame
// reconstruction sums; readers ignore unknown keys.

struct PredictionRecord {
  RegionSet regions;
  std::optional<double> ms;
  std::optional<ReconStats> recon;
  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

inline bool operator==(const ReconStats& a, const ReconStats& b) {
  return a.sum_in == b.sum_in && a.pixels_in == b.pixels_in && a.sum_out == b.sum_out && a.pixels_out == b.pixels_out;
}

inline nlohmann::json prediction_to_json(const PredictionRecord& rec) {
  const auto& rs = rec.regions;
  nlohmann::json j;
  j["frame"] = rs.frame_index;
  j["p"] = rs.budget_p;
  auto regions = nlohmann::json::array();
  for (const auto& r : rs.regions) {
    auto a = nlohmann::json::array({r.x_min, r.y_min, r.x_max, r.y_max});
    if (r.score) a.push_back(*r.score);
    regions.push_back(a);
  }
  j["regions"] = regions;
  if (rs.frame_width > 0) {
    j["width"] = rs.frame_width;
    j["height"] = rs.frame_height;
  }
  if (rec.ms) j["ms"] = *rec.ms;
  if (rec.recon) {
    j["err_b_sum"] = rec.recon->sum_in;
    j["err_b_px"] = rec.recon->pixels_in;
    j["err_r_sum"] = rec.recon->sum_out;
    j["err_r_px"] = rec.recon->pixels_out;
  }
  return j;
}

inline PredictionRecord prediction_from_json(const nlohmann::json& j) {
  PredictionRecord rec;
  auto& rs = rec.regions;
  rs.frame_index = j.at("frame").get<std::size_t>();
  rs.budget_p = j.at("p").get<double>();
  for (const auto& a : j.at("regions")) {
    if (!a.is_array() || (a.size() != 4 && a.size() != 5)) throw Error(ErrorCode::parse, "region needs 4 or 5 numbers");
    BoundingBox b{a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>(), std::nullopt};
    if (a.size() == 5) b.score = a[4].get<double>();
    rs.regions.push_back(b);
  }
  rs.frame_width = j.value("width", 0);
  rs.frame_height = j.value("height", 0);
  if (j.contains("ms")) rec.ms = j.at("ms").get<double>();
  if (j.contains("err_b_sum")) {
    ReconStats s;
    s.sum_in = j.at("err_b_sum").get<double>();
    s.pixels_in = j.at("err_b_px").get<std::int64_t>();
    s.sum_out = j.at("err_r_sum").get<double>();
    s.pixels_out = j.at("err_r_px").get<std::int64_t>();
    rec.recon = s;
  }
  return rec;
}

inline std::string predictions_to_jsonl(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& r : records) out += prediction_to_json(r).dump() + "\n";
  return out;
}

inline void write_predictions(const std::vector<PredictionRecord>& records, const fs::path& path) {
  detail::write_file(path.string(), predictions_to_jsonl(records));
}

inline void write_predictions(const std::vector<RegionSet>& sets, const fs::path& path) {
  std::vector<PredictionRecord> records;
  for (const auto& s : sets) records.push_back({s, std::nullopt, std::nullopt});
  write_predictions(records, path);
}

struct PredictionFile {
  std::vector<PredictionRecord> records;
  std::vector<std::string> warnings;
  bool out_of_bounds = false;
  bool budget_violation = false;

  /// Records grouped by budget, then frame.
  std::map<double, Predictions> by_budget() const {
    std::map<double, Predictions> out;
    for (const auto& r : records) out[r.regions.budget_p][r.regions.frame_index] = r.regions;
    return out;
  }
  std::optional<ReconStats> recon_total() const {
    std::optional<ReconStats> total;
    std::map<std::size_t, bool> seen;  // count each frame once across budgets
    for (const auto& r : records) {
      if (!r.recon || seen[r.regions.frame_index]) continue;
      seen[r.regions.frame_index] = true;
      if (!total) total = ReconStats{};
      total->add(*r.recon);
    }
    return total;
  }
};

inline PredictionFile parse_predictions(std::istream& in, const GridSpec& grid = {}) {
  PredictionFile file;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    PredictionRecord rec;
    try {
      rec = prediction_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "prediction line " + std::to_string(lineno) + ": " + e.what());
    }
    const auto& rs = rec.regions;
    if (rs.frame_width > 0) {
      for (const auto& b : rs.regions) {
        if (!b.inside(rs.frame_width, rs.frame_height) || !b.well_formed()) {
          file.out_of_bounds = true;
          file.warnings.push_back("frame " + std::to_string(rs.frame_index) + ": region outside frame bounds");
          break;
        }
      }
      if (exceeds_budget(rs, grid)) {
        file.budget_violation = true;
        file.warnings.push_back("frame " + std::to_string(rs.frame_index) + ": regions exceed budget p=" +
                                std::to_string(rs.budget_p));
      }
    }
    file.records.push_back(std::move(rec));
  }
  return file;
}

inline PredictionFile read_predictions(const fs::path& path, const GridSpec& grid = {}) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot read " + path.string());
  return parse_predictions(f, grid);
}

}  // namespace roiprop
