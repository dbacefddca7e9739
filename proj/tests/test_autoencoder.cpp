#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "roiprop/autoencoder.hpp"

using namespace roiprop;

namespace {

std::vector<Frame> random_frames(int n, int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Frame> out;
  for (int i = 0; i < n; ++i) {
    Frame f(w, h, 3, 0.0f, static_cast<std::size_t>(i));
    for (auto& v : f.data) v = u(rng);
    out.push_back(std::move(f));
  }
  return out;
}

ModelConfig tiny(int layers = 2, int n = 4, int size = 16) {
  ModelConfig c;
  c.n_input_frames = n;
  c.num_layers = layers;
  c.input_width = size;
  c.input_height = size;
  c.seed = 11;
  return c;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("roiprop_test_" + name);
}

}  // namespace

TEST(BuildModel, ChannelHalving) {
  ModelConfig c;
  c.n_input_frames = 4;
  c.base_channels = 16;
  c.num_layers = 6;
  c.input_width = c.input_height = 256;
  const auto m = build_model(c);
  std::vector<int> enc;
  for (const auto& l : m.encoder) enc.push_back(l.out_channels);
  EXPECT_EQ(enc, (std::vector<int>{16, 8, 4, 2, 1, 1}));
  EXPECT_EQ(m.encoder.front().in_channels, 12);
  std::vector<int> dec;
  for (const auto& l : m.decoder) dec.push_back(l.out_channels);
  EXPECT_EQ(dec, (std::vector<int>{1, 2, 4, 8, 16, 3}));
}

TEST(BuildModel, DefaultBaseIsFourTimesFrames) {
  auto c = tiny(3, 2, 32);
  EXPECT_EQ(build_model(c).encoder.front().out_channels, 8);
}

TEST(BuildModel, Deterministic) {
  const auto c = tiny(6, 4, 64);
  EXPECT_EQ(model_checksum(build_model(c)), model_checksum(build_model(c)));
  auto other = c;
  other.seed = 12;
  EXPECT_NE(model_checksum(build_model(c)), model_checksum(build_model(other)));
}

TEST(BuildModel, RejectsIndivisibleInput) {
  auto c = tiny(6, 4, 100);
  EXPECT_THROW(build_model(c), Error);
  c.input_width = c.input_height = 128;
  c.num_layers = 0;
  EXPECT_THROW(build_model(c), Error);
}

TEST(BuildModel, ConfigForFramePadsToMultiple) {
  const auto c = config_for_frame(1920, 1080);
  EXPECT_EQ(c.input_width, 1920);
  EXPECT_EQ(c.input_height, 1088);
  EXPECT_EQ(padded_extent(100, 6), 128);
}

TEST(Forward, ZeroParametersGiveZeroOutput) {
  auto m = build_model(tiny(3, 4, 32));
  for (auto p : m.parameters()) std::fill(p.begin(), p.end(), 0.0f);
  const auto frames = random_frames(4, 32, 32, 1);
  const auto out = forward_raw(m, std::span<const Frame>(frames));
  for (float v : out.data) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, OutputShapeIndexAndRange) {
  const auto m = build_model(config_for_frame(50, 30, tiny(3)));
  const auto frames = random_frames(4, 50, 30, 2);
  const auto out = forward(m, std::span<const Frame>(frames));
  EXPECT_EQ(out.width, 50);
  EXPECT_EQ(out.height, 30);
  EXPECT_EQ(out.index, 4u);
  for (float v : out.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Forward, InferencePathMatchesTrace) {
  const auto m = build_model(config_for_frame(70, 40, tiny(3)));
  const auto frames = random_frames(4, 70, 40, 3);
  const auto raw = forward_raw(m, std::span<const Frame>(frames));
  const auto clamped = forward(m, std::span<const Frame>(frames));
  for (std::size_t i = 0; i < raw.data.size(); ++i)
    ASSERT_NEAR(clamped.data[i], std::clamp(raw.data[i], 0.0f, 1.0f), 1e-6f);
}

TEST(Forward, WrongInputs) {
  const auto m = build_model(tiny(2));
  const auto frames = random_frames(4, 32, 32, 4);
  EXPECT_THROW(forward(m, std::span<const Frame>(frames)), Error);
  const auto three = random_frames(3, 16, 16, 4);
  EXPECT_THROW(forward(m, std::span<const Frame>(three)), Error);
}

// Regression baseline: 4 random 64x64 frames through the default 6-layer model
// with seed 11. Values recorded from a reference run.
TEST(Forward, RegressionBaseline) {
  const auto m = build_model(tiny(6, 4, 64));
  const auto frames = random_frames(4, 64, 64, 99);
  const auto out = forward(m, std::span<const Frame>(frames));
  const double sum = std::accumulate(out.data.begin(), out.data.end(), 0.0);
  EXPECT_NEAR(sum, 6115.6985, 1e-2);
  EXPECT_NEAR(out.at(0, 0, 0), 0.5000192, 1e-5);
  EXPECT_NEAR(out.at(31, 17, 1), 0.4704376, 1e-5);
  EXPECT_NEAR(out.at(63, 63, 2), 0.4999501, 1e-5);
}

TEST(Loss, PlainIdentityAndConstant) {
  Frame a(8, 8, 3, 0.25f);
  EXPECT_EQ(l1_loss(a, a, {}), 0.0);
  Frame b(8, 8, 3, 0.75f);
  EXPECT_NEAR(l1_loss(a, b, {}), 0.5, 1e-12);
}

TEST(Loss, AdversarialIndicator) {
  Frame pred(10, 10, 3, 0.0f);
  Frame target(10, 10, 3, 0.0f);
  const BoundingBox box{2, 3, 6, 8};
  for (int y = box.y_min; y < box.y_max; ++y)
    for (int x = box.x_min; x < box.x_max; ++x)
      for (int c = 0; c < 3; ++c) target.at(x, y, c) = 1.0f;
  LossSpec spec{LossMode::adversarial_boxes, {box}, {}};
  EXPECT_NEAR(l1_loss(pred, target, spec), -1.0, 1e-12);
  spec.mode = LossMode::ignore_boxes;
  EXPECT_NEAR(l1_loss(pred, target, spec), 0.0, 1e-12);
}

TEST(Loss, BoxModesNeedBoxes) {
  Frame a(4, 4, 3, 0.5f);
  EXPECT_THROW(l1_loss(a, a, LossSpec{LossMode::ignore_boxes, {}, {}}), Error);
  EXPECT_THROW(l1_loss(a, a, LossSpec{LossMode::adversarial_boxes, {{0, 0, 4, 4}}, {}}), Error);
}

TEST(Loss, AdversarialGradientNegatesPlainInsideBoxes) {
  auto frames = random_frames(5, 16, 16, 5);
  const Frame& pred = frames[0];
  const Frame& target = frames[1];
  const BoundingBox box{4, 4, 10, 12};
  const auto plain = l1_loss_gradient(pred, target, LossSpec{LossMode::ignore_boxes, {box}, {}});
  const auto adv = l1_loss_gradient(pred, target, LossSpec{LossMode::adversarial_boxes, {box}, {}});
  const double n_in = 6.0 * 8.0 * 3.0;
  const double n_out = (256.0 - 48.0) * 3.0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) {
        const bool in = x >= 4 && x < 10 && y >= 4 && y < 12;
        const auto i = pred.offset(x, y, c);
        if (in) {
          // plain L1 restricted to the box, with its own normalization
          const double d = static_cast<double>(pred.data[i]) - target.data[i];
          const double g_plain = d > 0 ? 1.0 / n_in : (d < 0 ? -1.0 / n_in : 0.0);
          EXPECT_DOUBLE_EQ(adv.grad.data[i], -g_plain);
          EXPECT_EQ(plain.grad.data[i], 0.0);
        } else {
          EXPECT_DOUBLE_EQ(adv.grad.data[i], plain.grad.data[i]);
          EXPECT_NEAR(std::fabs(plain.grad.data[i]), pred.data[i] == target.data[i] ? 0.0 : 1.0 / n_out, 1e-15);
        }
      }
}

TEST(Backward, MatchesFiniteDifferencesAllModes) {
  auto m = build_model<double>(tiny(2));
  auto frames = random_frames(5, 16, 16, 6);
  const std::span<const Frame> in(frames.data(), 4);
  const BoundingBox box{3, 5, 11, 12};
  for (auto mode : {LossMode::plain_l1, LossMode::ignore_boxes, LossMode::adversarial_boxes}) {
    LossSpec spec{mode, mode == LossMode::plain_l1 ? std::vector<BoundingBox>{} : std::vector<BoundingBox>{box}, {}};
    const auto r = oracle::check_gradient(m, in, frames[4], spec, 10, 77);
    for (int c : r.checked_per_layer) EXPECT_GE(c, 10);
    EXPECT_LT(r.max_rel_error, 1e-3) << "mode " << static_cast<int>(mode);
  }
}

TEST(Backward, HorizonExclusionZeroesGradientThere) {
  auto frames = random_frames(5, 16, 16, 7);
  const auto m = build_model(tiny(2));
  LossSpec all_excluded{LossMode::plain_l1, {}, std::vector<std::uint8_t>(256, 1)};
  const auto g = backward(m, std::span<const Frame>(frames.data(), 4), frames[4], all_excluded);
  EXPECT_EQ(g.norm(), 0.0);
  EXPECT_EQ(g.loss, 0.0);
}

TEST(Backward, SmallStepDoesNotIncreaseLoss) {
  auto m = build_model<double>(tiny(2));
  auto frames = random_frames(5, 16, 16, 8);
  const std::span<const Frame> in(frames.data(), 4);
  const auto g = backward(m, in, frames[4], {});
  const double before = prediction_loss(m, in, frames[4], {});
  auto params = m.parameters();
  const double step = 1e-4 / std::max(g.norm(), 1e-12);
  for (std::size_t b = 0; b < params.size(); ++b)
    for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] -= step * g.blocks[b][i];
  EXPECT_LE(prediction_loss(m, in, frames[4], {}), before);
}

namespace {

TrainingSequence constant_sequence(int frames, int size, float value) {
  TrainingSequence s;
  for (int i = 0; i < frames; ++i) s.frames.emplace_back(size, size, 3, value, static_cast<std::size_t>(i));
  return s;
}

}  // namespace

TEST(Train, ConstantSceneLossDrops) {
  auto m = build_model(tiny(3, 2, 32));
  std::vector<TrainingSequence> data{constant_sequence(10, 32, 0.8f)};
  TrainOptions opt;
  opt.epochs = 1000;
  opt.max_steps = 200;
  opt.learning_rate = 1e-2;
  opt.seed = 3;
  const auto rep = train(m, data, opt);
  EXPECT_EQ(rep.steps, 200u);
  const std::vector<Frame> in(data[0].frames.begin(), data[0].frames.begin() + 2);
  const double final_loss = prediction_loss(m, std::span<const Frame>(in), data[0].frames[2], {});
  EXPECT_LT(final_loss, 0.2 * rep.first_step_loss);
}

TEST(Train, ZeroLearningRateKeepsWeights) {
  auto m = build_model(tiny(2, 2, 16));
  const auto before = model_checksum(m);
  std::vector<TrainingSequence> data{constant_sequence(6, 16, 0.3f)};
  TrainOptions opt;
  opt.learning_rate = 0.0;
  opt.epochs = 2;
  train(m, data, opt);
  EXPECT_EQ(model_checksum(m), before);
}

TEST(Train, Deterministic) {
  std::vector<TrainingSequence> data{{random_frames(8, 16, 16, 9), {}}};
  TrainOptions opt;
  opt.epochs = 3;
  opt.seed = 4;
  opt.batch_size = 2;
  auto a = build_model(tiny(2, 2, 16));
  auto b = build_model(tiny(2, 2, 16));
  const auto ra = train(a, data, opt);
  const auto rb = train(b, data, opt);
  EXPECT_EQ(ra.epoch_losses, rb.epoch_losses);
  EXPECT_EQ(model_checksum(a), model_checksum(b));
}

TEST(Train, TooShortSequence) {
  auto m = build_model(tiny(2, 4, 16));
  std::vector<TrainingSequence> data{constant_sequence(4, 16, 0.5f)};
  EXPECT_THROW(train(m, data, {}), Error);
}

TEST(ModelFile, RoundTrip) {
  const auto m = build_model(tiny(4, 3, 48));
  const auto path = temp_file("model.bin");
  save_model(m, path.string());
  const auto back = load_model(path.string());
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(model_checksum(back), model_checksum(m));
  std::filesystem::remove(path);
}

TEST(ModelFile, TruncatedAndBadMagic) {
  const auto bytes = serialize_model(build_model(tiny(2)));
  try {
    deserialize_model(bytes.substr(0, bytes.size() - 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::truncated);
  }
  try {
    deserialize_model(bytes.substr(0, 20));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::truncated);
  }
  auto bad = bytes;
  bad[0] = 'X';
  try {
    deserialize_model(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::bad_magic);
  }
}

TEST(ModelFile, MissingFile) { EXPECT_THROW(load_model("/nonexistent/model.bin"), Error); }
