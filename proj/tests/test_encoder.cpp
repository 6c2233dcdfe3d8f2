// Copyright 2026 The ViWS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "support.hpp"
#include "viws/encoder.hpp"
#include "viws/errors.hpp"

namespace viws {
namespace {

using testing::grad_check;
using testing::readout;

torch::Tensor randn(std::vector<int64_t> sizes, uint64_t seed, torch::Dtype dtype = torch::kFloat64) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::randn(sizes, gen, torch::TensorOptions().dtype(dtype));
}

std::vector<torch::Tensor> with(std::vector<torch::Tensor> params, const torch::Tensor& extra) {
  params.push_back(extra);
  return params;
}

TEST(Encoder, PatchEmbedShapeAndBias) {
  torch::manual_seed(0);
  PatchEmbed embed(3, 16, ConvSpec{7, 4, 3});
  auto out = embed(torch::rand({5, 3, 64, 64}));
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{5, 16, 16, 16}));
  auto tokens = map_to_tokens(out);
  EXPECT_EQ(tokens.sizes(), (std::vector<int64_t>{5, 256, 16}));
  auto zero = embed(torch::zeros({1, 3, 64, 64}));
  auto bias = embed->proj->bias.view({1, 16, 1, 1}).expand_as(zero);
  EXPECT_TRUE(torch::allclose(zero, bias, 0, 1e-7));
}

TEST(Encoder, DeskShapesAndDeterminism) {
  torch::manual_seed(0);
  auto cfg = EncoderConfig::desk();
  Encoder enc(cfg);
  enc->eval();
  auto frames = torch::rand({1, 5, 3, 64, 64});
  auto msgs = init_messengers(48, 16, 5, 0).tokens;
  torch::NoGradGuard ng;
  auto out = enc(frames, msgs);
  const std::vector<int64_t> dims{16, 8, 4, 2};
  ASSERT_EQ(out.features.size(), 4u);
  for (size_t l = 0; l < 4; ++l)
    EXPECT_EQ(out.features[l].sizes(), (std::vector<int64_t>{5, cfg.channels[l], dims[l], dims[l]}));
  EXPECT_EQ(out.messengers.sizes(), (std::vector<int64_t>{1, 5, 48, 128}));
  auto again = enc(frames, msgs);
  for (size_t l = 0; l < 4; ++l) EXPECT_TRUE(torch::equal(out.features[l], again.features[l]));
  EXPECT_THROW(enc(torch::rand({1, 5, 3, 48, 48}), msgs), ShapeError);
  EXPECT_THROW(enc(frames, init_messengers(48, 16, 4, 0).tokens), ShapeError);
}

TEST(Encoder, BatchPermutationEquivariance) {
  torch::manual_seed(1);
  auto cfg = EncoderConfig::toy();
  Encoder enc(cfg);
  auto frames = torch::rand({3, 2, 3, 16, 16});
  auto msgs = init_messengers(6, 4, 2, 1).tokens;
  torch::NoGradGuard ng;
  auto out = enc(frames, msgs);
  auto perm = torch::tensor({2, 0, 1});
  auto swapped = enc(frames.index_select(0, perm), msgs);
  auto ref = out.features.back().view({3, 2, 12, 1, 1}).index_select(0, perm);
  EXPECT_TRUE(torch::allclose(swapped.features.back().view({3, 2, 12, 1, 1}), ref, 1e-5, 1e-6));
}

TEST(Encoder, PixelAttentionStaysWithinFrame) {
  torch::manual_seed(2);
  auto cfg = EncoderConfig::toy();
  cfg.temporal_shift = false;
  Encoder enc(cfg);
  auto frames = torch::rand({1, 3, 3, 16, 16});
  auto zeroed = frames.clone();
  zeroed[0][0].zero_();
  auto msgs = init_messengers(6, 4, 3, 2).tokens;
  torch::NoGradGuard ng;
  auto a = enc(frames, msgs);
  auto b = enc(zeroed, msgs);
  for (size_t l = 0; l < a.features.size(); ++l) {
    EXPECT_TRUE(torch::allclose(a.features[l].narrow(0, 1, 2), b.features[l].narrow(0, 1, 2), 0, 1e-6));
    EXPECT_FALSE(torch::allclose(a.features[l][0], b.features[l][0], 0, 1e-6));
  }
  EXPECT_TRUE(torch::allclose(a.messengers[0].narrow(0, 1, 2), b.messengers[0].narrow(0, 1, 2), 0, 1e-6));
  // With shifts on, pixel attention is still per frame, but tokens that
  // visited frame 0 return home carrying its content.
  cfg.temporal_shift = true;
  torch::manual_seed(2);
  Encoder shifted(cfg);
  auto c = shifted(frames, msgs);
  auto d = shifted(zeroed, msgs);
  for (size_t l = 0; l < c.features.size(); ++l)
    EXPECT_TRUE(torch::allclose(c.features[l].narrow(0, 1, 2), d.features[l].narrow(0, 1, 2), 0, 1e-6));
  for (int64_t t : {1, 2}) EXPECT_FALSE(torch::allclose(c.messengers[0][t], d.messengers[0][t], 0, 1e-4));
}

TEST(ShuntedAttention, UniformWeightsGiveMeanOfValues) {
  torch::manual_seed(3);
  ShuntedAttention attn(8, 1, std::pair<int64_t, int64_t>{1, 1});
  attn->to(torch::kFloat64);
  attn->hooks.uniform_weights = true;
  auto x = randn({2, 16 + 6, 8}, 4);
  torch::NoGradGuard ng;
  auto out = attn(x, 4, 4);
  auto v = attn->kv_[0](x).narrow(-1, 8, 8);
  auto expect = attn->proj(v.mean(1, true)).expand_as(out);
  EXPECT_TRUE(torch::allclose(out, expect, 0, 1e-12));

  // Block-level: each token equals that mean plus its own residual (before the feed-forward).
  EncoderBlock block(8, 1, std::pair<int64_t, int64_t>{1, 1}, 2);
  block->to(torch::kFloat64);
  block->attn->hooks.uniform_weights = true;
  torch::nn::init::zeros_(block->ffn->fc2->weight);
  torch::nn::init::zeros_(block->ffn->fc2->bias);
  auto y = block(x, 4, 4);
  auto normed = block->norm1(x);
  auto mean = block->attn->proj(block->attn->kv_[0](normed).narrow(-1, 8, 8).mean(1, true));
  EXPECT_TRUE(torch::allclose(y, x + mean, 0, 1e-12));
}

TEST(ShuntedAttention, MessengersAreLiveInKeysAndValues) {
  torch::manual_seed(5);
  ShuntedAttention attn(8, 2, std::pair<int64_t, int64_t>{2, 1});
  EXPECT_EQ(attn->num_groups(), 2);
  auto x = torch::randn({1, 16 + 6, 8});
  torch::NoGradGuard ng;
  auto with_m = attn(x, 4, 4);
  EXPECT_EQ(with_m.sizes(), x.sizes());
  attn->hooks.drop_messenger_kv = true;
  auto without = attn(x, 4, 4);
  EXPECT_GT((with_m.narrow(1, 0, 16) - without.narrow(1, 0, 16)).abs().max().item<double>(), 1e-6);
  EXPECT_THROW(attn(torch::randn({1, 15 + 6, 8}), 3, 5), ShapeError);
}

TEST(DetailFeedForward, IdentityKernelReducesToMlp) {
  torch::manual_seed(6);
  DetailFeedForward ffn(8, 16);
  ffn->to(torch::kFloat64);
  {
    torch::NoGradGuard ng;
    ffn->dwconv->weight.zero_();
    ffn->dwconv->weight.select(2, 1).select(2, 1).fill_(1.0);
    ffn->dwconv->bias.zero_();
  }
  auto x = randn({2, 16 + 6, 8}, 7);
  auto mlp = ffn->fc2(torch::gelu(ffn->fc1(x)));
  EXPECT_TRUE(torch::allclose(ffn(x, 4, 4), mlp, 0, 1e-12));
}

TEST(DetailFeedForward, ZeroSecondLayerMakesBlockResidualOnly) {
  torch::manual_seed(7);
  EncoderBlock block(8, 2, std::pair<int64_t, int64_t>{2, 1}, 2);
  torch::NoGradGuard ng;
  block->ffn->fc2->weight.zero_();
  block->ffn->fc2->bias.zero_();
  block->attn->proj->weight.zero_();
  block->attn->proj->bias.zero_();
  auto x = torch::randn({1, 16 + 6, 8});
  EXPECT_TRUE(torch::equal(block(x, 4, 4), x));
}

TEST(EncoderGradients, ShuntedAttentionMatchesFiniteDifferences) {
  torch::manual_seed(8);
  ShuntedAttention attn(8, 2, std::pair<int64_t, int64_t>{2, 1});
  attn->to(torch::kFloat64);
  auto x = randn({2, 16 + 6, 8}, 9).requires_grad_(true);
  auto r = grad_check([&] { return readout(attn(x, 4, 4)); }, with(attn->parameters(), x));
  EXPECT_TRUE(r.ok) << r.report;
  EXPECT_GT(r.checked, 30);
}

TEST(EncoderGradients, DetailFeedForwardMatchesFiniteDifferences) {
  torch::manual_seed(10);
  DetailFeedForward ffn(8, 16);
  ffn->to(torch::kFloat64);
  auto x = randn({2, 16 + 6, 8}, 11).requires_grad_(true);
  auto r = grad_check([&] { return readout(ffn(x, 4, 4)); }, with(ffn->parameters(), x));
  EXPECT_TRUE(r.ok) << r.report;
}

TEST(EncoderGradients, FullEncoderMatchesFiniteDifferences) {
  torch::manual_seed(12);
  Encoder enc(EncoderConfig::toy());
  enc->to(torch::kFloat64);
  auto frames = randn({1, 2, 3, 16, 16}, 13).requires_grad_(true);
  auto msgs = init_messengers(6, 4, 2, 3).tokens.to(torch::kFloat64).requires_grad_(true);
  auto loss = [&] {
    auto out = enc(frames, msgs);
    return readout(out.features.back(), 1) + readout(out.messengers, 2) + readout(out.features[0], 3);
  };
  auto r = grad_check(loss, with(with(enc->parameters(), frames), msgs), 4);
  EXPECT_TRUE(r.ok) << r.report;
}

TEST(EncoderConfig, JsonRoundTripAndValidation) {
  auto cfg = EncoderConfig::full();
  EXPECT_EQ(EncoderConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
  EXPECT_EQ(EncoderConfig::desk().total_stride(), 32);
  auto bad = EncoderConfig::desk();
  bad.channels = {16, 16, 64, 128};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = EncoderConfig::desk();
  bad.num_messengers = 50;
  EXPECT_THROW(bad.validate(), ConfigError);
}

}  // namespace
}  // namespace viws
