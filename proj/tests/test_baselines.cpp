#include <gtest/gtest.h>

#include <random>

#include "roiprop/baselines.hpp"

using namespace roiprop;

namespace {

Frame with_square(int w, int h, float bg, float fg, int x0, int y0, int size, std::size_t idx) {
  Frame f(w, h, 3, bg, idx);
  for (int y = y0; y < y0 + size; ++y)
    for (int x = x0; x < x0 + size; ++x)
      for (int c = 0; c < 3; ++c) f.at(x, y, c) = fg;
  return f;
}

}  // namespace

TEST(MeanFilter, FirstFrameInitializes) {
  MeanFilterState st;
  const auto e = mean_filter_step(st, Frame(4, 4, 3, 0.6f, 0));
  for (double v : e.data) EXPECT_EQ(v, 0.0);
  ASSERT_TRUE(st.mean.has_value());
}

TEST(MeanFilter, ConstantVideoHasNoError) {
  MeanFilterState st;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto e = mean_filter_step(st, Frame(4, 4, 3, 0.4f, i));
    for (double v : e.data) EXPECT_NEAR(v, 0.0, 1e-7);
  }
}

TEST(MeanFilter, NewObjectPixel) {
  MeanFilterState st;
  mean_filter_step(st, Frame(4, 4, 3, 0.2f, 0));
  Frame f(4, 4, 3, 0.2f, 1);
  f.at(2, 1, 0) = 0.9f;
  const auto e = mean_filter_step(st, f);
  EXPECT_NEAR(e.at(2, 1, 0), 0.7, 1e-6);
  EXPECT_NEAR(e.at(1, 1, 0), 0.0, 1e-7);
}

TEST(MeanFilter, ShapeChangeAndBadWindow) {
  MeanFilterState st;
  mean_filter_step(st, Frame(4, 4, 3));
  EXPECT_THROW(mean_filter_step(st, Frame(5, 4, 3)), Error);
  MeanFilterState bad;
  bad.window = 0;
  EXPECT_THROW(mean_filter_step(bad, Frame(4, 4, 3)), Error);
}

TEST(FrameDifferencing, StaticIsZero) {
  const auto e = frame_differencing_step(Frame(5, 5, 3, 0.3f), Frame(5, 5, 3, 0.3f));
  for (double v : e.data) EXPECT_EQ(v, 0.0);
}

TEST(FrameDifferencing, ExtremeValues) {
  const auto e = frame_differencing_step(Frame(5, 5, 3, 0.0f), Frame(5, 5, 3, 1.0f));
  for (double v : e.data) EXPECT_EQ(v, 1.0);
}

TEST(FrameDifferencing, MovedObjectSymmetricDifference) {
  // a 4x4 square moves right by its own width: the footprints are disjoint
  const auto a = with_square(20, 10, 0.1f, 0.8f, 3, 2, 4, 0);
  const auto b = with_square(20, 10, 0.1f, 0.8f, 7, 2, 4, 1);
  const auto e = frame_differencing_step(a, b);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 20; ++x) {
      const bool in_a = x >= 3 && x < 7 && y >= 2 && y < 6;
      const bool in_b = x >= 7 && x < 11 && y >= 2 && y < 6;
      for (int c = 0; c < 3; ++c) EXPECT_EQ(e.at(x, y, c) > 0.0, in_a != in_b) << x << "," << y;
    }
}

TEST(Gmm, ConvergedBackgroundHasNoError) {
  GmmState st;
  ErrorFrame last;
  for (std::size_t i = 0; i < 200; ++i) last = gmm_step(st, Frame(6, 4, 3, 0.45f, i));
  for (double v : last.data) EXPECT_EQ(v, 0.0);
}

TEST(Gmm, JumpFlagged) {
  GmmState st;
  for (std::size_t i = 0; i < 200; ++i) gmm_step(st, Frame(6, 4, 3, 0.2f, i));
  Frame f(6, 4, 3, 0.2f, 200);
  for (int c = 0; c < 3; ++c) f.at(3, 2, c) = 0.95f;
  const auto e = gmm_step(st, f);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(e.at(3, 2, c), 1.0);
  EXPECT_EQ(e.at(0, 0, 0), 0.0);
}

TEST(Gmm, WeightsStayNormalized) {
  GmmState st;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (std::size_t i = 0; i < 60; ++i) {
    Frame f(5, 5, 3, 0.0f, i);
    for (auto& v : f.data) v = i % 7 == 0 ? u(rng) : 0.5f + 0.05f * u(rng);
    gmm_step(st, f);
    for (const auto& px : st.pixels) {
      double s = 0.0;
      for (int k = 0; k < GmmPixelState::kComponents; ++k) {
        s += px.weight[static_cast<std::size_t>(k)];
        EXPECT_GE(px.variance[static_cast<std::size_t>(k)], st.params.variance_floor);
      }
      ASSERT_NEAR(s, 1.0, 1e-6);
    }
  }
}
