#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "roiprop/eval.hpp"
#include "roiprop/postprocess.hpp"

using namespace roiprop;

namespace {

RegionSet regions(std::size_t frame, std::vector<BoundingBox> boxes, double p = 1.0) {
  RegionSet rs;
  rs.frame_index = frame;
  rs.regions = std::move(boxes);
  rs.budget_p = p;
  return rs;
}

}  // namespace

TEST(Coverage, Basics) {
  EXPECT_EQ(coverage({10, 10, 20, 20}, {{0, 0, 50, 50}}), 1.0);
  EXPECT_EQ(coverage({10, 10, 20, 20}, {{30, 30, 40, 40}}), 0.0);
  EXPECT_EQ(coverage({10, 10, 20, 20}, {}), 0.0);
}

TEST(Coverage, TwoDisjointPieces) {
  // 10x10 gt, two regions covering 30 px each
  EXPECT_DOUBLE_EQ(coverage({0, 0, 10, 10}, {{-5, 0, 3, 10}, {7, 0, 20, 10}}), 0.6);
}

TEST(Coverage, OverlappingRegionsCountedOnce) {
  EXPECT_DOUBLE_EQ(coverage({0, 0, 10, 10}, {{0, 0, 6, 10}, {4, 0, 8, 10}}), 0.8);
}

TEST(Iou, BestSingleRegion) {
  EXPECT_DOUBLE_EQ(best_iou({0, 0, 10, 10}, {{0, 0, 10, 10}}), 1.0);
  EXPECT_DOUBLE_EQ(best_iou({0, 0, 10, 10}, {{0, 0, 5, 10}, {0, 0, 20, 10}}), 0.5);
}

TEST(Recall, EmptyPredictions) {
  GroundTruth gt{{0, {{0, 0, 4, 4}}}};
  EXPECT_EQ(recall_at_p({}, gt).recall, 0.0);
}

TEST(Recall, FullFrameRegion) {
  GroundTruth gt{{0, {{0, 0, 4, 4}, {10, 10, 20, 20}}}, {1, {{5, 5, 9, 9}}}};
  Predictions preds{{0, regions(0, {{0, 0, 64, 64}})}, {1, regions(1, {{0, 0, 64, 64}})}};
  EXPECT_EQ(recall_at_p(preds, gt).recall, 1.0);
}

TEST(Recall, HandCountedFixture) {
  // 3 frames, 4 boxes: covered 100%, 50% exactly, 40%, and 60% by two pieces
  GroundTruth gt{{0, {{0, 0, 10, 10}, {20, 20, 30, 30}}}, {1, {{0, 0, 10, 10}}}, {2, {{0, 0, 10, 10}}}};
  Predictions preds{{0, regions(0, {{0, 0, 10, 10}, {20, 20, 25, 30}})},
                    {1, regions(1, {{0, 0, 4, 10}})},
                    {2, regions(2, {{0, 0, 3, 10}, {7, 0, 10, 10}})}};
  const auto r = recall_at_p(preds, gt);
  EXPECT_EQ(r.total, 4u);
  EXPECT_EQ(r.hits, 3u);
  EXPECT_DOUBLE_EQ(r.recall, 0.75);
}

TEST(Recall, BudgetViolation) {
  GroundTruth gt{{0, {{0, 0, 4, 4}}}};
  auto rs = regions(0, {{0, 0, 96, 54}}, 0.05);
  rs.frame_width = 96;
  rs.frame_height = 54;
  Predictions preds{{0, rs}};
  EXPECT_THROW(recall_at_p(preds, gt), Error);
  RecallOptions lax;
  lax.strict_budget = false;
  EXPECT_EQ(recall_at_p(preds, gt, lax).budget_violations, 1u);
}

TEST(Recall, MissingFrameIsAnError) {
  GroundTruth gt{{0, {{0, 0, 4, 4}}}, {3, {{0, 0, 4, 4}}}};
  Predictions preds{{0, regions(0, {{0, 0, 4, 4}})}};
  EXPECT_THROW(recall_at_p(preds, gt), Error);
}

TEST(Recall, MatchesRasterOracle) {
  std::mt19937_64 rng(8);
  auto box = [&](int size) {
    std::uniform_int_distribution<int> u(0, size - 1);
    int a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    if (a == b) b = a + 1;
    if (c == d) d = c + 1;
    return BoundingBox{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
  };
  for (int t = 0; t < 50; ++t) {
    GroundTruth gt;
    Predictions preds;
    for (std::size_t f = 0; f < 3; ++f) {
      for (int k = 0; k < 3; ++k) gt[f].push_back(box(32));
      std::vector<BoundingBox> rs;
      for (int k = 0; k < 4; ++k) rs.push_back(box(32));
      preds[f] = regions(f, rs);
    }
    for (bool iou : {false, true}) {
      RecallOptions opt;
      opt.mode = iou ? OverlapMode::iou : OverlapMode::coverage;
      const auto r = recall_at_p(preds, gt, opt);
      const auto [hits, total] = oracle::raster_recall(preds, gt, iou);
      ASSERT_EQ(r.hits, hits);
      ASSERT_EQ(r.total, total);
    }
  }
}

TEST(AverageRecall, Values) {
  std::map<double, double> half;
  std::map<double, double> ramp;
  int i = 0;
  for (double p : standard_budgets()) {
    half[p] = 0.5;
    ramp[p] = 0.1 * i++;
  }
  EXPECT_DOUBLE_EQ(average_recall(half), 0.5);
  EXPECT_NEAR(average_recall(ramp), 0.45, 1e-12);
  ramp.erase(ramp.begin());
  EXPECT_THROW(average_recall(ramp), Error);
}

TEST(Recon, IndicatorAndUniform) {
  ErrorFrame e(10, 10, 3, 0.0);
  const BoundingBox b{2, 2, 6, 6};
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 6; ++x)
      for (int c = 0; c < 3; ++c) e.at(x, y, c) = 1.0;
  const auto s = recon_error_stats(e, {b});
  EXPECT_DOUBLE_EQ(*s.err_b(), 1.0);
  EXPECT_DOUBLE_EQ(*s.err_r(), 0.0);
  EXPECT_DOUBLE_EQ(*s.delta_r(), 1.0);
  const auto u = recon_error_stats(ErrorFrame(10, 10, 3, 0.3), {b});
  EXPECT_NEAR(*u.err_b(), 0.3, 1e-12);
  EXPECT_NEAR(*u.err_r(), 0.3, 1e-12);
  EXPECT_NEAR(*u.delta_r(), 0.0, 1e-12);
}

TEST(Evaluate, ReportFields) {
  GroundTruth gt{{0, {{0, 0, 10, 10}}}};
  std::map<double, Predictions> by_budget;
  for (double p : standard_budgets()) by_budget[p][0] = regions(0, p < 0.5 ? std::vector<BoundingBox>{} : std::vector<BoundingBox>{{0, 0, 10, 10}}, p);
  ReconStats rs{5.0, 10, 1.0, 10};
  const auto rep = evaluate(by_budget, gt, {}, rs);
  ASSERT_TRUE(rep.ar.has_value());
  EXPECT_DOUBLE_EQ(*rep.ar, 0.5);
  EXPECT_DOUBLE_EQ(*rep.delta_r, *rep.err_b - *rep.err_r);
  const auto j = to_json(rep);
  EXPECT_EQ(j["recalls"].size(), 10u);
  EXPECT_DOUBLE_EQ(j["ar"].get<double>(), 0.5);
  const auto csv = to_csv(rep);
  EXPECT_NE(csv.find("p,recall"), std::string::npos);
}

TEST(Evaluate, RecallNonDecreasingInBudget) {
  std::mt19937_64 rng(3);
  ErrorFrame e(96, 54, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GroundTruth gt;
  std::map<double, Predictions> by_budget;
  for (std::size_t f = 0; f < 5; ++f) {
    for (auto& v : e.data) v = u(rng);
    for (int k = 0; k < 4; ++k) {
      const int x = static_cast<int>(u(rng) * 80), y = static_cast<int>(u(rng) * 40);
      gt[f].push_back({x, y, x + 8, y + 8});
    }
    const auto s = grid_pool(e, {48, 27});
    for (double p : standard_budgets()) {
      auto rs = select_regions(s, p, f);
      by_budget[p][f] = rs;
    }
  }
  const auto rep = evaluate(by_budget, gt);
  double prev = -1.0;
  for (const auto& [p, r] : rep.recalls) {
    EXPECT_GE(r, prev);
    prev = r;
  }
}
