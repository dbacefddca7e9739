#include <gtest/gtest.h>

#include "roiprop/postprocess.hpp"
#include "roiprop/synthetic.hpp"

using namespace roiprop;

namespace {

SyntheticConfig small(int frames = 40) {
  SyntheticConfig c;
  c.width = 96;
  c.height = 64;
  c.num_frames = frames;
  c.seed = 17;
  return c;
}

}  // namespace

TEST(Synthetic, Deterministic) {
  auto c = small();
  c.random_anomalies = 2;
  c.anomaly_min_size = 6;
  c.anomaly_max_size = 10;
  c.anomaly_min_duration = 10;
  c.anomaly_max_duration = 30;
  const auto a = generate_synthetic(c);
  const auto b = generate_synthetic(c);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_EQ(a.gt, b.gt);
  c.seed = 18;
  EXPECT_NE(generate_synthetic(c).frames, a.frames);
}

TEST(Synthetic, ZeroAnomaliesEmptyTruth) {
  const auto s = generate_synthetic(small());
  EXPECT_TRUE(s.gt.empty());
  ASSERT_EQ(s.frames.size(), 40u);
  for (const auto& f : s.frames) EXPECT_TRUE(validate_frame(f).ok());
}

TEST(Synthetic, StaticAnomalyBoxExact) {
  auto c = small(12);
  c.anomalies.push_back(SyntheticAnomaly{30.0, 20.0, 20, 20, 0.95, 0.0, 0.0, 2, 5});
  const auto s = generate_synthetic(c);
  ASSERT_EQ(s.gt.size(), 5u);
  for (std::size_t t = 2; t < 7; ++t) EXPECT_EQ(s.gt.at(t), (std::vector<BoundingBox>{{30, 20, 50, 40}}));
  EXPECT_FALSE(s.gt.contains(1));
  EXPECT_FALSE(s.gt.contains(7));
  // the anomaly is painted with its intensity (before noise)
  EXPECT_NEAR(s.frames[3].at(40, 30, 0), 0.95, 0.1);
}

TEST(Synthetic, MovingAnomalyFollowsVelocity) {
  auto c = small(20);
  c.anomalies.push_back(SyntheticAnomaly{10.0, 10.0, 8, 6, 0.9, 1.0, 0.5, 0, 0});
  const auto s = generate_synthetic(c);
  EXPECT_EQ(s.gt.at(0).front(), (BoundingBox{10, 10, 18, 16}));
  EXPECT_EQ(s.gt.at(10).front(), (BoundingBox{20, 15, 28, 21}));
}

TEST(Synthetic, AnomalyLeavingFrameRejected) {
  auto c = small(50);
  c.anomalies.push_back(SyntheticAnomaly{80.0, 10.0, 10, 10, 0.9, 1.0, 0.0, 0, 0});
  try {
    generate_synthetic(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::out_of_range);
  }
}

TEST(Synthetic, LowContrastAnomalyRejected) {
  auto c = small(10);
  c.anomalies.push_back(SyntheticAnomaly{30.0, 20.0, 10, 10, c.base_level, 0.0, 0.0, 0, 0});
  EXPECT_THROW(generate_synthetic(c), Error);
}

TEST(Synthetic, ShortSequenceShortensDrawnAnomalies) {
  auto c = small(12);
  c.random_anomalies = 3;
  c.anomaly_min_size = 6;
  c.anomaly_max_size = 12;
  const auto s = generate_synthetic(c);
  for (const auto& a : s.anomalies) EXPECT_LE(a.duration, 12);
  EXPECT_FALSE(s.gt.empty());
}

TEST(Synthetic, RandomAnomaliesStayInFrame) {
  auto c = small(120);
  c.random_anomalies = 5;
  c.anomaly_min_size = 6;
  c.anomaly_max_size = 12;
  const auto s = generate_synthetic(c);
  EXPECT_EQ(s.anomalies.size(), 5u);
  for (const auto& [t, boxes] : s.gt)
    for (const auto& b : boxes) {
      EXPECT_TRUE(b.inside(c.width, c.height));
      EXPECT_TRUE(b.well_formed());
    }
}

TEST(Synthetic, GlintsLastOneFrame) {
  auto c = small(30);
  c.wave_amplitude = 0.0;
  c.luminance_drift = 0.0;
  c.noise_sigma = 0.0;
  c.transient_glints = 3.0;
  c.glint_intensity = 1.0;
  const auto s = generate_synthetic(c);
  // glint pixels rarely stay lit in the next frame (only by chance overlap)
  std::size_t lit = 0;
  std::size_t persistent = 0;
  for (std::size_t t = 1; t < s.frames.size(); ++t)
    for (std::size_t i = 0; i < s.frames[t].data.size(); ++i)
      if (s.frames[t].data[i] > 0.9f) {
        ++lit;
        if (s.frames[t - 1].data[i] > 0.9f) ++persistent;
      }
  EXPECT_GT(lit, 0u);
  EXPECT_LT(persistent * 10, lit);
}

TEST(Synthetic, TelemetryAndSky) {
  auto c = small(5);
  c.telemetry = true;
  c.transient_glints = 0.0;
  c.camera = Telemetry{100.0, horizon_dip_deg(100.0), 0.0, 500.0};  // horizon through the centre
  const auto s = generate_synthetic(c);
  for (const auto& f : s.frames) {
    ASSERT_TRUE(f.telemetry.has_value());
    EXPECT_NEAR(f.at(40, 5, 0), c.sky_level, 0.1);
    EXPECT_LT(f.at(40, 60, 0), 0.6f);
  }
}

TEST(Synthetic, ConfigFromJson) {
  const auto j = nlohmann::json::parse(R"({"width": 64, "height": 48, "num_frames": 7, "seed": 3,
    "anomalies": [{"x": 4, "y": 5, "size": 6, "intensity": 0.9}, {"x": 1, "y": 2, "width": 3, "height": 4}],
    "telemetry": {"altitude_m": 80}})");
  const auto c = synthetic_config_from_json(j);
  EXPECT_EQ(c.width, 64);
  EXPECT_EQ(c.num_frames, 7);
  ASSERT_EQ(c.anomalies.size(), 2u);
  EXPECT_EQ(c.anomalies[0].width, 6);
  EXPECT_EQ(c.anomalies[1].height, 4);
  EXPECT_TRUE(c.telemetry);
  EXPECT_EQ(c.camera.altitude_m, 80.0);
  EXPECT_THROW(synthetic_config_from_json(nlohmann::json::parse(R"({"anomalies": [{"x": 1}]})")), Error);
}
