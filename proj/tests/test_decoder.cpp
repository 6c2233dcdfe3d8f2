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

#include <chrono>

#include "support.hpp"
#include "viws/decoder.hpp"
#include "viws/errors.hpp"
#include "viws/model.hpp"

namespace viws {
namespace {

using testing::grad_check;
using testing::readout;

// Frames kept away from 0 and 1 so the output clamp stays inactive.
torch::Tensor mid_frames(std::vector<int64_t> sizes, uint64_t seed, torch::Dtype dtype = torch::kFloat32) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return 0.25 + 0.5 * torch::rand(sizes, gen, torch::TensorOptions().dtype(dtype));
}

TEST(Decoder, IdentityAtInitIsBitExact) {
  const auto start = std::chrono::steady_clock::now();
  ViWSNet model(ModelConfig::desk());
  model->eval();
  auto frames = torch::rand({2, 5, 3, 64, 64});
  torch::NoGradGuard ng;
  auto out = model(frames);
  EXPECT_TRUE(torch::equal(out.restored, frames.select(1, 2)));
  EXPECT_TRUE(torch::equal(out.decoded.recoveries, frames));
  EXPECT_EQ(out.decoded.retrieval.abs().max().item<double>(), 0.0);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 10.0);
}

TEST(Decoder, EvalIsDeterministicAndBounded) {
  ViWSNet model(ModelConfig::toy());
  model->randomize_emission_heads(1, 0.5);
  model->eval();
  auto frames = torch::rand({1, 3, 3, 32, 32});
  torch::NoGradGuard ng;
  auto a = model(frames).restored;
  auto b = model(frames).restored;
  EXPECT_TRUE(torch::equal(a, b));
  EXPECT_GE(a.min().item<double>(), 0.0);
  EXPECT_LE(a.max().item<double>(), 1.0);
  EXPECT_EQ(a.sizes(), (std::vector<int64_t>{1, 3, 32, 32}));
}

TEST(WeatherRetrieval, ShapesZeroPathAndGroupMasking) {
  torch::manual_seed(2);
  DecoderConfig cfg;
  WeatherRetrieval retrieval(32, cfg);
  auto features = torch::randn({3, 32, 2, 2});
  auto msgs = torch::randn({3, 12, 32});
  torch::NoGradGuard ng;
  auto r = retrieval(features, msgs);
  EXPECT_EQ(r.sizes(), features.sizes());
  retrieval->masked_group = 1;
  EXPECT_GT((retrieval(features, msgs) - r).abs().max().item<double>(), 1e-6);
  retrieval->masked_group.reset();
  retrieval->back_attn->proj->weight.zero_();
  retrieval->back_attn->proj->bias.zero_();
  EXPECT_EQ(retrieval(features, torch::zeros_like(msgs)).abs().max().item<double>(), 0.0);
  EXPECT_THROW(retrieval(features, torch::randn({3, 12, 16})), ShapeError);
}

TEST(TemporalFusion, InitPassesCentreAndRespectsReceptiveField) {
  torch::manual_seed(3);
  TemporalFusion fusion(std::vector<int64_t>{4, 4}, 3);
  auto rec = torch::rand({1, 9, 3, 8, 8});
  torch::NoGradGuard ng;
  fusion->convs[2]->weight.zero_();
  fusion->convs[2]->bias.zero_();
  EXPECT_TRUE(torch::equal(fusion(rec), rec.select(1, 4)));
  fusion->convs[2]->weight.normal_(0.0, 0.1);
  auto base = fusion(rec);
  EXPECT_EQ(base.sizes(), (std::vector<int64_t>{1, 3, 8, 8}));
  // Three kernel-3 convs reach 3 frames either side of the centre.
  auto far = rec.clone();
  far.select(1, 0).zero_();
  far.select(1, 8).zero_();
  EXPECT_TRUE(torch::equal(fusion(far), base));
  auto near = rec.clone();
  near.select(1, 1).zero_();
  EXPECT_FALSE(torch::equal(fusion(near), base));
  EXPECT_THROW(fusion(torch::rand({1, 2, 3, 8, 8})), ConfigError);
}

TEST(RefineNet, ZeroHeadIsIdentityAndSmall) {
  ViWSNet model(ModelConfig::desk());
  auto img = torch::rand({2, 3, 64, 64});
  torch::NoGradGuard ng;
  EXPECT_TRUE(torch::equal(model->refine(img), img));
  model->randomize_emission_heads(4, 1.0);
  auto out = model->refine(img);
  EXPECT_GE(out.min().item<double>(), 0.0);
  EXPECT_LE(out.max().item<double>(), 1.0);
  const int64_t refine = count_parameters(*model->refine);
  const int64_t main = count_parameters(*model) - refine;
  EXPECT_LT(static_cast<double>(refine), 0.25 * static_cast<double>(main));
}

TEST(DecoderGradients, RetrievalProjectionMatchesFiniteDifferences) {
  // Two-frame toy clip through retrieval, projection and subtraction.
  ViWSNet model(ModelConfig::toy());
  model->randomize_emission_heads(5, 0.005);
  model->to(torch::kFloat64);
  auto frames = mid_frames({1, 2, 3, 16, 16}, 6, torch::kFloat64);
  auto msgs = model->messengers.narrow(0, 0, 2).detach();
  torch::NoGradGuard outer;
  auto encoded = model->encoder(frames, msgs);
  auto features = encoded.features;
  for (auto& f : features) f = f.detach().contiguous().requires_grad_(true);
  auto m = encoded.messengers.detach().contiguous().requires_grad_(true);
  torch::AutoGradMode grad_on(true);
  auto& dec = model->decoder;
  auto loss = [&] {
    auto r = dec->retrieval(features.back(), m.reshape({2, m.size(2), m.size(3)}));
    auto res = dec->projection(r, features, frames.reshape({2, 3, 16, 16})).view(frames.sizes());
    return readout(unit_clamp(frames - res));
  };
  auto params = dec->retrieval->parameters();
  for (auto& p : dec->projection->parameters()) params.push_back(p);
  params.push_back(m);
  for (auto& f : features) params.push_back(f);
  auto r = grad_check(loss, params, 4);
  EXPECT_TRUE(r.ok) << r.report;
}

TEST(DecoderGradients, RecoveryGradientWithRespectToRetrieval) {
  ViWSNet model(ModelConfig::toy());
  model->randomize_emission_heads(7, 0.005);
  model->to(torch::kFloat64);
  auto frames = mid_frames({1, 2, 3, 16, 16}, 8, torch::kFloat64);
  torch::Tensor r;
  std::vector<torch::Tensor> features;
  {
    torch::NoGradGuard ng;
    auto encoded = model->encoder(frames, model->messengers.narrow(0, 0, 2));
    features = encoded.features;
    auto m = encoded.messengers;
    r = model->decoder->retrieval(features.back(), m.reshape({2, m.size(2), m.size(3)}));
  }
  r.requires_grad_(true);
  auto loss = [&] {
    auto res = model->decoder->projection(r, features, frames.reshape({2, 3, 16, 16})).view(frames.sizes());
    return readout(unit_clamp(frames - res));
  };
  auto check = grad_check(loss, {r}, 12);
  EXPECT_TRUE(check.ok) << check.report;
}

TEST(DecoderGradients, FullPipelineMatchesFiniteDifferences) {
  ViWSNet model(ModelConfig::toy());
  model->randomize_emission_heads(9, 0.005);
  model->to(torch::kFloat64);
  auto frames = mid_frames({1, 3, 3, 16, 16}, 10, torch::kFloat64).requires_grad_(true);
  auto loss = [&] { return readout(model(frames).restored); };
  auto params = model->parameters();
  params.push_back(frames);
  auto r = grad_check(loss, params, 2);
  EXPECT_TRUE(r.ok) << r.report;
}

TEST(DecoderConfig, Validation) {
  DecoderConfig cfg;
  EXPECT_NO_THROW(cfg.validate(4));
  EXPECT_THROW(cfg.validate(3), ConfigError);
  EXPECT_EQ(DecoderConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
}

}  // namespace
}  // namespace viws
