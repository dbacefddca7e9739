// Command-line front end: train, infer, eval, bench, synth.
//
// Exit codes: 0 success, 2 usage or input error, 3 runtime failure.
#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "roiprop/autoencoder.hpp"
#include "roiprop/data.hpp"
#include "roiprop/eval.hpp"
#include "roiprop/pipeline.hpp"
#include "roiprop/synthetic.hpp"

namespace roiprop {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

inline GridSpec parse_grid(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t a = 0, b = 0;
    GridSpec g{std::stoi(s.substr(0, x), &a), std::stoi(s.substr(x + 1), &b)};
    if (a != x || b != s.size() - x - 1 || g.columns < 1 || g.rows < 1) throw std::invalid_argument(s);
    return g;
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, "grid must look like 48x27, got '" + s + "'");
  }
}

/// "0.05", "0.05,0.25" or "all" (the ten standard budgets).
inline std::vector<double> parse_budgets(const std::string& s) {
  if (s == "all") return standard_budgets();
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double p = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::out_of_range, "budget " + item + " outside (0, 1]");
      out.push_back(p);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "bad budget '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::invalid_argument, "empty budget list");
  return out;
}

inline LossMode parse_loss(const std::string& s) {
  if (s == "plain") return LossMode::plain_l1;
  if (s == "ignore") return LossMode::ignore_boxes;
  if (s == "adversarial") return LossMode::adversarial_boxes;
  throw Error(ErrorCode::invalid_argument, "unknown loss '" + s + "'");
}

inline OverlapMode parse_overlap(const std::string& s) {
  if (s == "coverage") return OverlapMode::coverage;
  if (s == "iou") return OverlapMode::iou;
  throw Error(ErrorCode::invalid_argument, "unknown overlap mode '" + s + "'");
}

/// 64-bit FNV-1a, used to fingerprint outputs.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Options shared by infer and bench

struct MethodArgs {
  std::string method = "auto";
  std::string model;
  std::string grid = "48x27";
  std::string budgets = "0.05";
  int momentum = 2;
  int lnr_iterations = 3;
  std::string horizon = "on";
  std::string merge = "off";
  std::string overlap = "coverage";
  std::uint64_t seed = 0;
  bool momentum_given = false;
  bool lnr_given = false;
};

inline void add_method_options(CLI::App& cmd, MethodArgs& a) {
  cmd.add_option("--method", a.method, "Error source")->check(CLI::IsMember({"auto", "mf", "fd", "gmm"}));
  cmd.add_option("--model", a.model, "Weight file (method auto)");
  cmd.add_option("--grid", a.grid, "Grid columns x rows");
  cmd.add_option("--p", a.budgets, "Budget(s): 0.05, 0.05,0.25 or all");
  cmd.add_option("--momentum", a.momentum, "Error frames averaged");
  cmd.add_option("--lnr-iters", a.lnr_iterations, "Local noise remover iterations");
  cmd.add_option("--horizon", a.horizon, "Exclude sky above the horizon")->check(CLI::IsMember({"on", "off"}));
  cmd.add_option("--merge", a.merge, "Merge adjacent cells")->check(CLI::IsMember({"on", "off"}));
  cmd.add_option("--overlap-mode", a.overlap, "Recall overlap")->check(CLI::IsMember({"coverage", "iou"}));
  cmd.add_option("--seed", a.seed, "Seed");
}

/// Baselines run without momentum and noise removal unless asked for.
inline PipelineConfig pipeline_config(const MethodArgs& a) {
  PipelineConfig c;
  c.method = parse_method(a.method);
  c.model_path = a.model;
  c.grid = parse_grid(a.grid);
  c.budgets = parse_budgets(a.budgets);
  const bool baseline = c.method != Method::autoencoder;
  c.momentum = baseline && !a.momentum_given ? 1 : a.momentum;
  c.lnr_iterations = baseline && !a.lnr_given ? 0 : a.lnr_iterations;
  c.horizon = a.horizon == "on";
  c.merge = a.merge == "on";
  c.overlap = parse_overlap(a.overlap);
  c.seed = a.seed;
  return c;
}

inline std::optional<Model> pipeline_model(const PipelineConfig& c) {
  if (c.method != Method::autoencoder) return std::nullopt;
  if (c.model_path.empty()) throw Error(ErrorCode::invalid_argument, "--model is required for method auto");
  return load_model(c.model_path);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::vector<std::string> sequences;
  std::string out;
  int epochs = 10;
  std::size_t steps = 0;
  double learning_rate = 1e-3;
  int batch = 1;
  int n_frames = 4;
  int layers = 6;
  int base_channels = 0;
  std::string loss = "plain";
  std::string horizon = "on";
  std::uint64_t seed = 0;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out) {
  const LossMode loss = parse_loss(a.loss);
  std::vector<TrainingSequence> data;
  for (const auto& dir : a.sequences) {
    auto seq = load_sequence(fs::path(dir));
    if (loss != LossMode::plain_l1 && !seq.manifest.ground_truth)
      throw Error(ErrorCode::invalid_argument, "loss " + a.loss + " needs gt.json in " + dir);
    if (seq.frames.size() < static_cast<std::size_t>(a.n_frames) + 1)
      throw Error(ErrorCode::invalid_argument, dir + " has fewer than n+1 frames");
    if (!data.empty() && !data.front().frames.front().same_shape(seq.frames.front()))
      throw Error(ErrorCode::dimension_mismatch, dir + " differs in frame size");
    data.push_back({std::move(seq.frames), std::move(seq.gt)});
  }
  ModelConfig mc;
  mc.n_input_frames = a.n_frames;
  mc.num_layers = a.layers;
  mc.base_channels = a.base_channels;
  mc.seed = a.seed;
  const auto& first = data.front().frames.front();
  mc = config_for_frame(first.width, first.height, mc);
  auto model = build_model<float>(mc);

  TrainOptions opt;
  opt.epochs = a.epochs;
  opt.max_steps = a.steps;
  opt.learning_rate = a.learning_rate;
  opt.batch_size = a.batch;
  opt.loss = loss;
  opt.horizon = a.horizon == "on";
  opt.seed = a.seed;
  opt.on_epoch = [&out](int epoch, double mean, std::size_t steps) {
    out << nlohmann::json{{"epoch", epoch + 1}, {"loss", mean}, {"steps", steps}}.dump() << std::endl;
  };
  train(model, data, opt);
  save_model(model, a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
  std::string sequence;
  std::string out;
  bool timing = false;
  MethodArgs method;
};

inline int cmd_infer(const InferArgs& a, std::ostream& out) {
  const auto cfg = pipeline_config(a.method);
  auto seq = load_sequence(fs::path(a.sequence));
  Pipeline pipeline(cfg, pipeline_model(cfg));
  const auto run = run_sequence(pipeline, seq.frames, seq.manifest.ground_truth ? &seq.gt : nullptr, a.timing);
  if (a.out.empty() || a.out == "-")
    out << predictions_to_jsonl(run.records);
  else
    write_predictions(run.records, fs::path(a.out));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string predictions;
  std::string gt;
  std::string budgets;  // empty = every budget present
  std::string overlap = "coverage";
  std::string grid = "48x27";
  std::string csv;
  bool strict = false;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  RecallOptions opt;
  opt.mode = parse_overlap(a.overlap);
  opt.grid = parse_grid(a.grid);
  opt.strict_budget = a.strict;
  const auto file = read_predictions(fs::path(a.predictions), opt.grid);
  for (const auto& w : file.warnings) err << "warning: " << w << '\n';
  if (file.out_of_bounds && a.strict) throw Error(ErrorCode::out_of_range, "predictions leave the frame");
  int w = 0, h = 0;
  for (const auto& r : file.records)
    if (r.regions.frame_width > 0) {
      w = r.regions.frame_width;
      h = r.regions.frame_height;
      break;
    }
  const auto gt = parse_ground_truth(fs::path(a.gt), w, h);
  auto by_budget = file.by_budget();
  if (!a.budgets.empty()) {
    std::map<double, Predictions> chosen;
    for (double p : parse_budgets(a.budgets)) {
      auto it = std::find_if(by_budget.begin(), by_budget.end(),
                             [p](const auto& kv) { return std::fabs(kv.first - p) < 1e-9; });
      chosen[p] = it == by_budget.end() ? Predictions{} : it->second;
    }
    by_budget = std::move(chosen);
  }
  const auto rep = evaluate(by_budget, gt, opt, file.recon_total());
  out << to_json(rep).dump(2) << '\n';
  if (!a.csv.empty()) detail::write_file(a.csv, to_csv(rep));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string sequence;  // empty = synthetic frames
  int width = 1920;
  int height = 1080;
  int frames = 1000;
  int warmup = 10;
  int repetitions = 1;
  int pool = 8;
  std::string out;
  MethodArgs method;
};

struct LatencyStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double fps = 0.0;
};

inline LatencyStats latency_stats(std::vector<double> ms) {
  if (ms.empty()) throw Error(ErrorCode::invalid_argument, "no samples");
  std::sort(ms.begin(), ms.end());
  LatencyStats s;
  s.mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  const std::size_t n = ms.size();
  s.median = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95 = ms[std::max<std::size_t>(rank, 1) - 1];
  s.fps = s.mean > 0.0 ? 1000.0 / s.mean : 0.0;
  return s;
}

inline nlohmann::json to_json(const LatencyStats& s) {
  return {{"mean_ms", s.mean}, {"median_ms", s.median}, {"p95_ms", s.p95}, {"fps", s.fps}};
}

/// Frames are preloaded and cycled, so the timing covers compute only.
inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.repetitions < 1) throw Error(ErrorCode::invalid_argument, "repetitions must be >= 1");
  if (a.frames < 1 || a.warmup < 0 || a.pool < 1) throw Error(ErrorCode::invalid_argument, "bad frame counts");
  const auto cfg = pipeline_config(a.method);

  std::vector<Frame> pool;
  if (!a.sequence.empty()) {
    pool = load_sequence(fs::path(a.sequence)).frames;
  } else {
    SyntheticConfig sc;
    sc.width = a.width;
    sc.height = a.height;
    sc.num_frames = a.pool;
    sc.seed = a.method.seed;
    sc.wave_length = 24.0 * a.width / 384.0;
    sc.anomaly_min_size = std::max(1, a.width / 32);
    sc.anomaly_max_size = std::max(sc.anomaly_min_size, std::min(a.width, a.height) / 8);
    sc.anomaly_min_duration = sc.anomaly_max_duration = a.pool;
    sc.random_anomalies = 2;
    pool = generate_synthetic(sc).frames;
  }

  std::optional<Model> model;
  if (cfg.method == Method::autoencoder) {
    if (!cfg.model_path.empty()) {
      model = load_model(cfg.model_path);
    } else {
      // untrained weights time the same as trained ones
      ModelConfig mc = config_for_frame(pool.front().width, pool.front().height);
      mc.seed = a.method.seed;
      model = build_model<float>(mc);
    }
  }

  std::vector<double> model_ms, momentum_ms, lnr_ms, grid_ms, select_ms, total_ms;
  std::vector<PredictionRecord> records;
  for (int rep = 0; rep < a.repetitions; ++rep) {
    Pipeline pipeline(cfg, model);
    const int count = a.warmup + a.frames;
    for (int i = 0; i < count; ++i) {
      Frame f = pool[static_cast<std::size_t>(i) % pool.size()];
      f.index = static_cast<std::size_t>(i);
      auto res = pipeline.process(f);
      if (i < a.warmup) continue;
      model_ms.push_back(res.times.model);
      momentum_ms.push_back(res.times.momentum);
      lnr_ms.push_back(res.times.lnr);
      grid_ms.push_back(res.times.grid);
      select_ms.push_back(res.times.select);
      total_ms.push_back(res.times.total);
      if (rep == 0)
        for (auto& rs : res.regions) records.push_back({std::move(rs), std::nullopt, std::nullopt});
    }
  }
  const std::string text = predictions_to_jsonl(records);
  if (!a.out.empty()) detail::write_file(a.out, text);

  nlohmann::json j;
  j["method"] = to_string(cfg.method);
  j["width"] = pool.front().width;
  j["height"] = pool.front().height;
  j["frames"] = total_ms.size();
  j["warmup"] = a.warmup;
  j["repetitions"] = a.repetitions;
  j["stages"] = {{"model", to_json(latency_stats(model_ms))},   {"momentum", to_json(latency_stats(momentum_ms))},
                 {"lnr", to_json(latency_stats(lnr_ms))},       {"grid", to_json(latency_stats(grid_ms))},
                 {"select", to_json(latency_stats(select_ms))}};
  j["total"] = to_json(latency_stats(total_ms));
  j["regions_digest"] = hex64(fnv1a(text));
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string config;  // JSON; empty = defaults
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> frames;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SyntheticConfig sc;
  if (!a.config.empty()) {
    try {
      sc = synthetic_config_from_json(nlohmann::json::parse(detail::read_file(a.config)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, a.config + ": " + e.what());
    }
  }
  if (a.seed) sc.seed = *a.seed;
  if (a.frames) sc.num_frames = *a.frames;
  const auto seq = generate_synthetic(sc);
  write_sequence(fs::path(a.out), seq.frames, seq.gt);
  std::size_t boxes = 0;
  for (const auto& [f, b] : seq.gt) boxes += b.size();
  out << nlohmann::json{{"frames", seq.frames.size()}, {"anomalies", seq.anomalies.size()}, {"gt_boxes", boxes}}.dump()
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int exit_code_for(ErrorCode code) { return code == ErrorCode::numeric ? kExitRuntime : kExitUsage; }

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Region proposals for bandwidth-limited aerial maritime video", "roiprop"};
  app.set_config("--config", "", "key=value config file; flags given on the command line win");
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the next-frame autoencoder on normal sequences");
  train_cmd->add_option("sequences", train_args.sequences, "Sequence directories")->required();
  train_cmd->add_option("-o,--out", train_args.out, "Output weight file")->required();
  train_cmd->add_option("--epochs", train_args.epochs);
  train_cmd->add_option("--steps", train_args.steps, "Stop after this many updates (0 = no limit)");
  train_cmd->add_option("--lr", train_args.learning_rate);
  train_cmd->add_option("--batch", train_args.batch);
  train_cmd->add_option("--n-frames", train_args.n_frames, "Past frames fed to the model");
  train_cmd->add_option("--layers", train_args.layers);
  train_cmd->add_option("--base-channels", train_args.base_channels, "0 = 4 * n-frames");
  train_cmd->add_option("--loss", train_args.loss)->check(CLI::IsMember({"plain", "ignore", "adversarial"}));
  train_cmd->add_option("--horizon", train_args.horizon)->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--seed", train_args.seed);

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Propose regions for every frame of a sequence");
  infer_cmd->add_option("sequence", infer_args.sequence, "Sequence directory")->required();
  infer_cmd->add_option("-o,--out", infer_args.out, "Predictions file (default stdout)");
  infer_cmd->add_flag("--timing", infer_args.timing, "Add per-frame latency as \"ms\"");
  add_method_options(*infer_cmd, infer_args.method);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Recall and reconstruction statistics for a predictions file");
  eval_cmd->add_option("predictions", eval_args.predictions)->required();
  eval_cmd->add_option("--gt", eval_args.gt, "Ground-truth JSON")->required();
  eval_cmd->add_option("--p", eval_args.budgets, "Budgets to evaluate (default: all present)");
  eval_cmd->add_option("--overlap-mode", eval_args.overlap)->check(CLI::IsMember({"coverage", "iou"}));
  eval_cmd->add_option("--grid", eval_args.grid, "Grid used for budget checks");
  eval_cmd->add_option("--csv", eval_args.csv, "Write the area-recall curve here");
  eval_cmd->add_flag("--strict", eval_args.strict, "Fail on budget violations");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Per-stage latency over preloaded frames");
  bench_cmd->add_option("sequence", bench_args.sequence, "Sequence directory (default: synthetic frames)");
  bench_cmd->add_option("--width", bench_args.width);
  bench_cmd->add_option("--height", bench_args.height);
  bench_cmd->add_option("--frames", bench_args.frames, "Measured frames per repetition");
  bench_cmd->add_option("--warmup", bench_args.warmup);
  bench_cmd->add_option("--repetitions", bench_args.repetitions);
  bench_cmd->add_option("--pool", bench_args.pool, "Distinct synthetic frames cycled");
  bench_cmd->add_option("-o,--out", bench_args.out, "Also write the first repetition's predictions");
  add_method_options(*bench_cmd, bench_args.method);

  SynthArgs synth_args;
  std::uint64_t synth_seed = 0;
  int synth_frames = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic sequence with ground truth");
  synth_cmd->add_option("scene", synth_args.config, "Synthetic scene JSON (default scene if omitted)");
  synth_cmd->add_option("-o,--out", synth_args.out, "Output directory")->required();
  auto* seed_opt = synth_cmd->add_option("--seed", synth_seed);
  auto* frames_opt = synth_cmd->add_option("--frames", synth_frames);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  auto given = [](CLI::App* cmd, const char* name) { return cmd->count(name) > 0; };
  try {
    if (*train_cmd) return cmd_train(train_args, out);
    if (*infer_cmd) {
      infer_args.method.momentum_given = given(infer_cmd, "--momentum");
      infer_args.method.lnr_given = given(infer_cmd, "--lnr-iters");
      return cmd_infer(infer_args, out);
    }
    if (*eval_cmd) return cmd_eval(eval_args, out, err);
    if (*bench_cmd) {
      bench_args.method.momentum_given = given(bench_cmd, "--momentum");
      bench_args.method.lnr_given = given(bench_cmd, "--lnr-iters");
      return cmd_bench(bench_args, out);
    }
    if (*synth_cmd) {
      if (seed_opt->count()) synth_args.seed = synth_seed;
      if (frames_opt->count()) synth_args.frames = synth_frames;
      return cmd_synth(synth_args, out);
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace roiprop
