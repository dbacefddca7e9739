// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Tolerances are fixed here, not taken from arguments.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "oracles.hpp"
#include "roiprop/cli.hpp"
#include "roiprop/roiprop.hpp"
#include "test_support.hpp"

using namespace roiprop;
using testing_support::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Frozen synthetic benchmark: low-contrast bright targets on a swell with
// sun-glitter patches, sensor noise and drifting cloud shadows.

SyntheticConfig bench_scene(std::uint64_t seed, int frames, int anomalies) {
  SyntheticConfig c;
  c.seed = seed;
  c.num_frames = frames;
  c.random_anomalies = anomalies;
  c.transient_glints = 5.0;
  c.wave_amplitude = 0.1;
  c.wave_length = 16.0;
  c.glint_min_size = 1;
  c.glint_size = 1;
  c.glint_intensity = 0.9;
  c.glint_patch_radius = 16;
  c.glint_density = 0.5;
  c.anomaly_min_size = 10;
  c.anomaly_max_size = 24;
  c.anomaly_min_contrast = 0.1;
  c.anomaly_max_contrast = 0.3;
  c.anomaly_bright_fraction = 1.0;
  c.noise_sigma = 0.03;
  c.shadows = 4;
  c.shadow_radius = 40.0;
  c.shadow_depth = 0.15;
  c.shadow_speed = 0.7;
  return c;
}

struct Variant {
  double r5 = 0.0;
  double delta_r = 0.0;
};

class Bench {
 public:
  Bench() : test_(generate_synthetic(bench_scene(1001, 500, 10))) {}

  Variant run(Method method, const Model* model, int momentum, int lnr) const {
    PipelineConfig pc;
    pc.method = method;
    pc.momentum = momentum;
    pc.lnr_iterations = lnr;
    Pipeline p(pc, model ? std::optional<Model>(*model) : std::nullopt);
    const auto run = run_sequence(p, test_.frames, &test_.gt);
    const auto rep = evaluate(group_by_budget(run.records), test_.gt, {}, run.recon);
    return {rep.recalls.at(0.05), rep.delta_r.value_or(-1.0)};
  }

  // two 150-frame training sequences seeded from first_seed
  static Model train_model(int n, LossMode loss, std::uint64_t first_seed, int anomalies) {
    std::vector<TrainingSequence> data;
    for (std::uint64_t s = first_seed; s < first_seed + 2; ++s) {
      auto seq = generate_synthetic(bench_scene(s, 150, anomalies));
      data.push_back({std::move(seq.frames), std::move(seq.gt)});
    }
    ModelConfig mc;
    mc.n_input_frames = n;
    mc.seed = 7;
    auto model = build_model<float>(config_for_frame(384, 216, mc));
    TrainOptions opt;
    opt.epochs = 100;
    opt.max_steps = 600;
    opt.seed = 5;
    opt.loss = loss;
    train(model, data, opt);
    return model;
  }

 private:
  SyntheticSequence test_;
};

Bench& bench() {
  static Bench b;
  return b;
}

struct AblationResults {
  Variant n1, n4, n4_lnr, full, fd;
};

const AblationResults& ablation() {
  static const AblationResults r = [] {
    AblationResults a;
    const auto m1 = Bench::train_model(1, LossMode::plain_l1, 2001, 0);
    a.n1 = bench().run(Method::autoencoder, &m1, 1, 0);
    const auto m4 = Bench::train_model(4, LossMode::plain_l1, 2001, 0);
    a.n4 = bench().run(Method::autoencoder, &m4, 1, 0);
    a.n4_lnr = bench().run(Method::autoencoder, &m4, 1, 3);
    a.full = bench().run(Method::autoencoder, &m4, 2, 3);
    a.fd = bench().run(Method::frame_differencing, nullptr, 1, 0);
    return a;
  }();
  return r;
}

// ---------------------------------------------------------------------------

Outcome box_count() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ErrorFrame e(1920, 1080, 1);
  for (auto& v : e.data) v = u(rng);
  const auto rs = select_regions(grid_pool(e, {48, 27}), 0.05);
  return {rs.regions.size() == 65, fmt("%zu regions", rs.regions.size())};
}

Outcome gradients() {
  ModelConfig mc;
  mc.input_width = mc.input_height = 16;
  mc.num_layers = 2;
  mc.n_input_frames = 4;
  mc.seed = 21;
  const auto model = build_model<double>(mc);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Frame> frames;
  for (int i = 0; i < 5; ++i) {
    Frame f(16, 16, 3, 0.0f, static_cast<std::size_t>(i));
    for (auto& v : f.data) v = u(rng);
    frames.push_back(std::move(f));
  }
  const std::span<const Frame> in(frames.data(), 4);
  double worst = 0.0;
  int fewest = 1 << 30;
  for (auto mode : {LossMode::plain_l1, LossMode::ignore_boxes, LossMode::adversarial_boxes}) {
    LossSpec spec{mode, {}, {}};
    if (mode != LossMode::plain_l1) spec.gt_boxes = {BoundingBox{3, 5, 11, 12}};
    const auto r = oracle::check_gradient(model, in, frames[4], spec, 10, 77);
    worst = std::max(worst, r.max_rel_error);
    for (int c : r.checked_per_layer) fewest = std::min(fewest, c);
  }
  return {worst < 1e-3 && fewest >= 10, fmt("max rel error %.2e, >= %d params per layer", worst, fewest)};
}

Outcome horizon() {
  const double step = horizon_center_offset(130.0, 17.0, 2121.0) - horizon_center_offset(130.0, 16.0, 2121.0);
  double worst = 0.0;
  for (double h = 10.0; h + 10.0 <= 300.0 + 1e-9; h += 1.0)
    for (double beta = 0.0; beta <= 20.0 + 1e-9; beta += 0.25)
      worst = std::max(worst, std::fabs(horizon_center_offset(h + 10.0, beta, 2121.0) -
                                        horizon_center_offset(h, beta, 2121.0)));
  const bool ok = std::fabs(std::fabs(step) - 40.0) <= 2.0 && worst <= 1.1;
  return {ok, fmt("+1 deg gimbal shifts %.2f px, max 10 m shift %.3f px", std::fabs(step), worst)};
}

Outcome ablation_trend() {
  const auto& a = ablation();
  const bool ok = a.n4.r5 >= a.n1.r5 && a.n4_lnr.r5 >= a.n4.r5 && a.full.r5 >= a.n4_lnr.r5 && a.full.r5 - a.n1.r5 >= 0.05;
  return {ok, fmt("R5 n1 %.3f, n4 %.3f, +lnr %.3f, +momentum %.3f", a.n1.r5, a.n4.r5, a.n4_lnr.r5, a.full.r5)};
}

Outcome baseline_order() {
  const auto& a = ablation();
  return {a.full.r5 >= a.fd.r5, fmt("R5 auto %.3f, fd %.3f", a.full.r5, a.fd.r5)};
}

BoundingBox random_box(std::mt19937_64& rng, int size) {
  std::uniform_int_distribution<int> u(0, size);
  int a = u(rng), b = u(rng), c = u(rng), d = u(rng);
  if (a == b) b = a < size ? a + 1 : a - 1;
  if (c == d) d = c < size ? c + 1 : c - 1;
  return {std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> size_d(1, 64);
  std::uniform_int_distribution<int> count_d(0, 5);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const int size = size_d(rng);
    GroundTruth gt;
    Predictions preds;
    for (std::size_t f = 0; f < 2; ++f) {
      const int ng = count_d(rng);
      for (int k = 0; k < ng; ++k) gt[f].push_back(random_box(rng, size));
      RegionSet rs;
      rs.frame_index = f;
      rs.frame_width = rs.frame_height = size;
      const int np = count_d(rng);
      for (int k = 0; k < np; ++k) rs.regions.push_back(random_box(rng, size));
      for (const auto& g : gt[f])
        if (coverage(g, rs.regions) != oracle::raster_coverage(g, rs.regions)) ++mismatches;
      preds[f] = std::move(rs);
    }
    for (auto mode : {OverlapMode::coverage, OverlapMode::iou}) {
      RecallOptions opt;
      opt.mode = mode;
      const auto r = recall_at_p(preds, gt, opt);
      const auto [hits, total] = oracle::raster_recall(preds, gt, mode == OverlapMode::iou);
      if (r.hits != hits || r.total != total) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%d mismatches over 200 fixtures", mismatches)};
}

Outcome components() {
  const GridSpec g{48, 27};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> density(0.02, 0.6);
  std::uniform_int_distribution<int> budget(1, 10);
  int structure = 0;
  int over = 0;
  for (int t = 0; t < 500; ++t) {
    ErrorFrame e(480, 270, 1);
    for (auto& v : e.data) v = u(rng);
    const auto scores = grid_pool(e, g);
    std::bernoulli_distribution on(density(rng));
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(g.cell_count()));
    for (auto& m : mask) m = on(rng) ? 1 : 0;
    int count = 0;
    const auto labels = oracle::flood_labels(mask, g.columns, g.rows, &count);
    std::set<std::vector<int>> got;
    for (const auto& c : cell_components(mask, scores)) {
      auto cells = c.cells;
      std::sort(cells.begin(), cells.end());
      got.insert(cells);
    }
    if (got != oracle::partition(labels) || static_cast<int>(got.size()) != count) ++structure;

    const double p = 0.05 * budget(rng);
    const auto merged = merge_regions(select_regions(scores, p), scores, p);
    std::int64_t area = 0;
    for (const auto& b : merged.regions) area += box_area(b);
    if (area > budget_area(p, g, e.width, e.height)) ++over;
  }
  return {structure == 0 && over == 0, fmt("%d structure mismatches, %d over budget in 500 masks", structure, over)};
}

Outcome discrimination() {
  const auto& a = ablation();
  return {a.full.delta_r > 0.0 && a.full.delta_r >= a.fd.delta_r,
          fmt("delta_r auto %.4f, fd %.4f", a.full.delta_r, a.fd.delta_r)};
}

Outcome adversarial() {
  // training data now contains anomalies with boxes
  const auto ignore = Bench::train_model(4, LossMode::ignore_boxes, 3001, 6);
  const auto adv = Bench::train_model(4, LossMode::adversarial_boxes, 3001, 6);
  const double ri = bench().run(Method::autoencoder, &ignore, 2, 3).r5;
  const double ra = bench().run(Method::autoencoder, &adv, 2, 3).r5;
  return {ra >= ri - 0.01, fmt("R5 adversarial %.3f, ignore %.3f", ra, ri)};
}

int cli(std::vector<std::string> args, std::ostream& out) {
  args.insert(args.begin(), "roiprop");
  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != kExitOk) throw std::runtime_error(args[1] + " failed: " + err.str());
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome determinism() {
  TempDir dir("determinism");
  std::ostringstream sink;
  std::string files[2];
  for (int run = 0; run < 2; ++run) {
    const auto base = dir / ("run" + std::to_string(run));
    const auto seq = (base / "seq").string();
    const auto model = (base / "model.bin").string();
    const auto pred = (base / "pred.jsonl").string();
    cli({"synth", "-o", seq, "--seed", "42", "--frames", "40"}, sink);
    cli({"train", seq, "-o", model, "--steps", "30", "--epochs", "5", "--seed", "9"}, sink);
    cli({"infer", seq, "--model", model, "--p", "all", "--merge", "on", "-o", pred}, sink);
    files[run] = slurp(pred);
  }
  const bool ok = !files[0].empty() && files[0] == files[1];
  return {ok, fmt("%zu-byte prediction files %s", files[0].size(), ok ? "identical" : "differ")};
}

Outcome throughput() {
  std::map<std::string, nlohmann::json> res;
  for (const char* method : {"auto", "mf", "fd"}) {
    std::ostringstream out;
    cli({"bench", "--method", method, "--frames", "1000", "--width", "1920", "--height", "1080"}, out);
    res[method] = nlohmann::json::parse(out.str());
  }
  bool ok = true;
  std::string detail;
  for (auto& [method, j] : res) {
    double sum = 0.0;
    for (const char* stage : {"model", "momentum", "lnr", "grid", "select"}) {
      const auto& s = j.at("stages").at(stage);
      for (const char* k : {"mean_ms", "median_ms", "p95_ms", "fps"}) ok = ok && s.contains(k);
      sum += s.at("mean_ms").get<double>();
    }
    const double total = j.at("total").at("mean_ms").get<double>();
    ok = ok && j.at("frames").get<int>() >= 1000 && std::fabs(sum - total) <= 0.1 * total;
    detail += fmt("%s %.1f ms/frame; ", method.c_str(), total);
  }
  const double t_auto = res["auto"]["total"]["mean_ms"].get<double>();
  ok = ok && res["mf"]["total"]["mean_ms"].get<double>() < t_auto && res["fd"]["total"]["mean_ms"].get<double>() < t_auto;
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

}  // namespace

int main() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  report(1, "box count at 5%", box_count);
  report(2, "loss gradients", gradients);
  report(3, "horizon sensitivity", horizon);
  report(4, "ablation trend", ablation_trend);
  report(5, "autoencoder vs frame differencing", baseline_order);
  report(6, "metric oracle", metric_oracle);
  report(7, "component oracle", components);
  report(8, "discrimination", discrimination);
  report(9, "adversarial vs ignore", adversarial);
  report(10, "determinism", determinism);
  report(11, "throughput", throughput);
  std::printf("%d of 11 failed\n", failures);
  return failures == 0 ? 0 : 1;
}
