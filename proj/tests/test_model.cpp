#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "amc/losses.hpp"
#include "amc/model.hpp"
#include "amc/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace amc;
using amc::testing::random_tensor;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("amc_test_model_" + name);
}

// 1x8x8 input, two conv blocks, 2-d embedding: small enough for exhaustive checks.
ArchitectureSpec tiny_spec() {
  ArchitectureSpec s;
  s.name = "tiny";
  s.in_channels = 1;
  s.in_height = s.in_width = 8;
  s.embed_dim = 2;
  s.num_classes = 3;
  LayerSpec conv{LayerKind::conv, 4, 3, Padding::same, 0.1};
  LayerSpec pool{LayerKind::maxpool};
  LayerSpec last{LayerKind::conv, 2, 1, Padding::same, 0.1};
  LayerSpec gap{LayerKind::global_avg_pool};
  LayerSpec fc{LayerKind::dense, 3};
  s.layers = {conv, pool, last, gap, fc};
  return s;
}

}  // namespace

TEST(Presets, LayerTraceShapes) {
  const auto mnist = infer_shapes(make_spec(Preset::mnist_net, 128, 10), 2);
  EXPECT_EQ(mnist.front(), (Shape{2, 1, 28, 28}));            // noise
  EXPECT_EQ(mnist[mnist.size() - 3], (Shape{2, 128, 5, 5}));   // final 1x1 conv
  EXPECT_EQ(mnist[mnist.size() - 2], (Shape{2, 128}));         // GAP
  EXPECT_EQ(mnist.back(), (Shape{2, 10}));
  const auto cifar = infer_shapes(make_spec(Preset::cifar_net, 3, 20), 1);
  EXPECT_EQ(cifar[cifar.size() - 3], (Shape{1, 3, 6, 6}));
  EXPECT_EQ(cifar.back(), (Shape{1, 20}));
}

TEST(Presets, ParameterNames) {
  Model m = Model::build(Preset::mnist_net, 2, 10, 1);
  EXPECT_EQ(m.params().front().name, "conv1.weight");
  EXPECT_EQ(m.param("conv4.weight").value.shape(), (Shape{2, 128, 1, 1}));
  EXPECT_EQ(m.param("fc.weight").value.shape(), (Shape{2, 10}));
  EXPECT_EQ(m.bn_states().size(), 4u);
  EXPECT_THROW(m.param("conv9.weight"), ConfigError);
}

TEST(Presets, RejectBadEmbeddingAndWiring) {
  EXPECT_THROW(make_spec(Preset::mnist_net, 64, 10), ConfigError);
  ArchitectureSpec s = make_spec(Preset::mnist_net, 128, 10);
  s.embed_dim = 3;  // no longer equals the last conv width
  EXPECT_THROW(validate(s), ConfigError);
  s = make_spec(Preset::cifar_net, 128, 10);
  s.layers[11].padding = Padding::same;  // 512 conv: 8x8 would reach the GAP instead of 6x6
  EXPECT_THROW(validate(s), ConfigError);
  s = make_spec(Preset::mnist_net, 128, 10);
  s.in_height = 27;
  EXPECT_THROW(validate(s), Error);
  EXPECT_THROW(parse_preset("resnet"), ConfigError);
}

TEST(Presets, SpecJsonRoundTrip) {
  const ArchitectureSpec s = make_spec(Preset::cifar_net, 128, 10);
  EXPECT_EQ(spec_from_json(to_json(s)), s);
  EXPECT_THROW(spec_from_json(nlohmann::json{{"name", "x"}}), DataError);
}

TEST(Model, HeInitialisationScale) {
  Model m = Model::build(Preset::mnist_net, 128, 10, 3);
  const Tensor& w = m.param("conv2.weight").value;  // fan-in 64 * 9
  double ss = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) ss += w[i] * w[i];
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(w.size())), std::sqrt(2.0 / 576.0), 0.002);
  EXPECT_EQ(m.param("bn2.gamma").value, Tensor(Shape{64}, 1.0));
  EXPECT_EQ(m.param("fc.bias").value, Tensor(Shape{10}, 0.0));
}

TEST(Model, SameSeedSameWeights) {
  Model a = Model::build(Preset::mnist_net, 3, 10, 5), b = Model::build(Preset::mnist_net, 3, 10, 5);
  Model c = Model::build(Preset::mnist_net, 3, 10, 6);
  EXPECT_EQ(a.params()[0].value, b.params()[0].value);
  EXPECT_NE(a.params()[0].value, c.params()[0].value);
}

TEST(Model, ForwardShapesMatchInference) {
  Model m = Model::build(Preset::mnist_net, 128, 10, 1);
  Rng rng(1);
  Tape tape;
  const ForwardResult r =
      forward(m, tape, tape.constant(random_tensor({3, 1, 28, 28}, rng)), Mode::train, rng);
  EXPECT_EQ(r.trace, infer_shapes(m.spec(), 3));
  EXPECT_EQ(r.features.shape(), (Shape{3, 128}));
  EXPECT_EQ(r.final_conv.shape(), (Shape{3, 128, 5, 5}));
  EXPECT_THROW(forward(m, tape, tape.constant(Tensor({1, 3, 28, 28})), Mode::eval, rng), ShapeError);
}

TEST(Model, EvalPredictionIsBatchIndependent) {
  Model m = Model::build(Preset::mnist_net, 128, 10, 2);
  Rng rng(2);
  const Tensor x = random_tensor({5, 1, 28, 28}, rng);
  const Prediction all = predict(m, x, 250);
  const Prediction one = predict(m, x, 1);
  EXPECT_LT(amc::testing::max_abs_diff(all.logits, one.logits), 1e-10);
  EXPECT_EQ(predict(m, x).logits, all.logits);
}

TEST(Model, EndToEndGradientsTinyNet) {
  Model m(tiny_spec(), 4);
  Rng data(4);
  const Tensor x = random_tensor({6, 1, 8, 8}, data);
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  for (LossMode mode : {LossMode::ce, LossMode::eucd, LossMode::amc}) {
    LossConfig cfg;
    cfg.mode = mode;
    cfg.lambda = 1.0;
    cfg.margin_g = 2.0;
    const auto r = amc::testing::check_parameters(m.params(), [&](Tape& tape) {
      Rng layer(7), pair(8);
      return batch_loss(m, tape, x, labels, cfg, 1.0, layer, pair).loss;
    });
    EXPECT_LT(r.max_rel_error, 1e-4) << to_string(mode) << ": " << r.worst;
    EXPECT_GT(r.checked, 30u);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Model m = Model::build(Preset::mnist_net, 3, 10, 9);
  m.bn_states()[1].running_mean.fill(0.25);
  m.bn_states()[3].running_var.fill(1.75);
  m.param("fc.bias").value[2] = -0.125;
  const auto path = temp_path("roundtrip.amcc");
  save_checkpoint(m, path, {{"seed", 9}, {"note", "unit"}});
  Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.model.spec(), m.spec());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    EXPECT_EQ(ck.model.params()[i].name, m.params()[i].name);
    EXPECT_EQ(ck.model.params()[i].value, m.params()[i].value);
  }
  for (std::size_t i = 0; i < m.bn_states().size(); ++i) {
    EXPECT_EQ(ck.model.bn_states()[i].running_mean, m.bn_states()[i].running_mean);
    EXPECT_EQ(ck.model.bn_states()[i].running_var, m.bn_states()[i].running_var);
  }
  EXPECT_EQ(ck.metadata["note"], "unit");
  Rng rng(3);
  const Tensor x = random_tensor({2, 1, 28, 28}, rng);
  EXPECT_EQ(predict(ck.model, x).logits, predict(m, x).logits);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  Model m = Model::build(Preset::mnist_net, 2, 10, 1);
  const auto path = temp_path("corrupt.amcc");
  save_checkpoint(m, path, {});
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  EXPECT_THROW(load_checkpoint(path), DataError);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "NOTACKPT and some more bytes";
  }
  EXPECT_THROW(load_checkpoint(path), DataError);
  EXPECT_THROW(load_checkpoint(temp_path("missing.amcc")), DataError);
  std::filesystem::remove(path);
}
