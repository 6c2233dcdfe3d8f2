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

#include <cmath>

#include "support.hpp"
#include "viws/errors.hpp"
#include "viws/objectives.hpp"

namespace viws {
namespace {

using testing::grad_check;

torch::Tensor f64(std::vector<int64_t> sizes, double value) { return torch::full(sizes, value, torch::kFloat64); }

TEST(SmoothL1, KneeValues) {
  auto gt = f64({2, 3, 4, 4}, 0.25);
  EXPECT_EQ(smooth_l1(gt, gt).item<double>(), 0.0);
  EXPECT_EQ(smooth_l1(gt + 0.5, gt).item<double>(), 0.125);
  EXPECT_EQ(smooth_l1(gt + 2.0, gt).item<double>(), 1.5);
  EXPECT_EQ(smooth_l1(gt - 2.0, gt).item<double>(), 1.5);
  EXPECT_THROW(smooth_l1(gt, f64({2, 3, 4, 5}, 0.0)), ShapeError);
}

TEST(SmoothL1, ContinuousAndC1AtKnee) {
  auto gt = f64({1}, 0.0);
  const double h = 1e-9;
  auto below = smooth_l1(f64({1}, 1.0 - h), gt).item<double>();
  auto above = smooth_l1(f64({1}, 1.0 + h), gt).item<double>();
  EXPECT_NEAR(below, 0.5, 1e-8);
  EXPECT_NEAR(above, 0.5, 1e-8);
  for (double x : {1.0 - h, 1.0 + h}) {
    auto p = f64({1}, x).requires_grad_(true);
    smooth_l1(p, gt).backward();
    EXPECT_NEAR(p.grad().item<double>(), 1.0, 1e-8);
  }
}

TEST(Perceptual, ZeroForEqualInputsAndNonnegative) {
  PerceptualExtractor ex;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(1);
  auto a = torch::rand({2, 3, 32, 32}, gen);
  auto b = torch::rand({2, 3, 32, 32}, gen);
  EXPECT_EQ(perceptual_loss(a, a, ex).item<double>(), 0.0);
  EXPECT_GT(perceptual_loss(a, b, ex).item<double>(), 0.0);
  for (const auto& p : ex->parameters()) EXPECT_FALSE(p.requires_grad());
  auto taps = ex(a);
  ASSERT_EQ(taps.size(), 3u);
  EXPECT_EQ(taps[0].size(1), 8);
  EXPECT_EQ(taps[2].size(1), 32);
}

TEST(Perceptual, SecondOrderForLinearisedExtractor) {
  PerceptualConfig cfg;
  cfg.linear = true;
  PerceptualExtractor ex(cfg);
  ex->to(torch::kFloat64);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(2);
  auto gt = torch::rand({1, 3, 32, 32}, gen, torch::kFloat64);
  auto dir = torch::randn({1, 3, 32, 32}, gen, torch::kFloat64);
  std::vector<double> eps{1e-3, 1e-2, 1e-1}, logs;
  for (double e : eps) logs.push_back(std::log(perceptual_loss(gt + e * dir, gt, ex).item<double>()));
  for (size_t i = 1; i < eps.size(); ++i) {
    const double slope = (logs[i] - logs[i - 1]) / (std::log(eps[i]) - std::log(eps[i - 1]));
    EXPECT_NEAR(slope, 2.0, 1e-6);
  }
}

TEST(TotalLoss, RecombinationIdentity) {
  PerceptualExtractor ex;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
  auto pred = torch::rand({3, 3, 32, 32}, gen);
  auto gt = torch::rand({3, 3, 32, 32}, gen);
  auto logits = torch::randn({3, 3}, gen);
  auto labels = torch::tensor({0, 1, 2}, torch::kLong);
  auto b = total_loss(pred, gt, logits, labels, LossWeights{}, ex);
  auto expect = b.smooth_l1 + 0.04 * b.perceptual + 0.001 * b.adversarial;
  EXPECT_TRUE(torch::equal(b.total, expect));
  EXPECT_TRUE(torch::equal(b.supervised, b.smooth_l1 + 0.04 * b.perceptual));
  auto zero = total_loss(pred, gt, logits, labels, LossWeights{0.0, 0.0}, ex);
  EXPECT_EQ(zero.total.item<double>(), zero.smooth_l1.item<double>());
  auto none = total_loss(pred, gt, torch::Tensor(), labels, LossWeights{}, ex);
  EXPECT_EQ(none.adversarial.item<double>(), 0.0);
}

TEST(TotalLoss, PerfectPredictionWithUniformLogits) {
  PerceptualExtractor ex;
  auto gt = torch::rand({3, 3, 32, 32});
  auto b = total_loss(gt, gt, torch::zeros({3, 3}), torch::tensor({0, 1, 2}, torch::kLong), LossWeights{}, ex);
  EXPECT_NEAR(b.total.item<double>(), 0.001 * std::log(3.0), 1e-9);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  PerceptualExtractor ex;
  ex->to(torch::kFloat64);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(4);
  auto pred = torch::rand({2, 3, 16, 16}, gen, torch::kFloat64).requires_grad_(true);
  auto gt = torch::rand({2, 3, 16, 16}, gen, torch::kFloat64);
  auto logits = torch::randn({2, 3}, gen, torch::kFloat64).requires_grad_(true);
  auto labels = torch::tensor({2, 0}, torch::kLong);
  auto loss = [&] { return total_loss(pred, gt, logits, labels, LossWeights{}, ex).total; };
  auto r = grad_check(loss, {pred, logits}, 16);
  EXPECT_TRUE(r.ok) << r.report;
}

TEST(Psnr, ClosedForms) {
  auto gt = f64({8, 8, 3}, 0.2);
  EXPECT_EQ(psnr(gt, gt), kPsnrIdentical);
  EXPECT_NEAR(psnr(gt + 0.1, gt), 20.0, 1e-9);
  EXPECT_NEAR(psnr(gt + 0.5, gt), 6.020599913279624, 1e-9);
  EXPECT_NEAR(psnr(FramePair{gt, gt + 0.5}), 6.020599913279624, 1e-9);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(5);
  auto a = torch::rand({8, 8, 3}, gen, torch::kFloat64);
  EXPECT_EQ(psnr(a, gt), psnr(gt, a));
}

// 16x16 checkerboard of 4x4 cells (0.8 / 0.2) and its 3x3 box blur with
// edge replication. Reference values come from an independent SSIM
// implementation (Gaussian window, sigma 1.5, population covariance).
torch::Tensor checkerboard() {
  auto cb = torch::empty({16, 16}, torch::kFloat64);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) cb[i][j] = ((i / 4) + (j / 4)) % 2 == 0 ? 0.8 : 0.2;
  return cb;
}

torch::Tensor box_blur(const torch::Tensor& x) {
  auto out = torch::empty_like(x);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      double acc = 0.0;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
          acc += x[std::clamp(i + di, 0, 15)][std::clamp(j + dj, 0, 15)].item<double>();
      out[i][j] = acc / 9.0;
    }
  return out;
}

TEST(Ssim, MatchesReferenceImplementation) {
  auto cb = checkerboard();
  auto bl = box_blur(cb);
  EXPECT_NEAR(ssim(cb, bl), 0.6718922830688756, 1e-6);
  std::vector<torch::Tensor> a, b;
  for (int c = 0; c < 3; ++c) {
    a.push_back(cb * (1 - 0.1 * c) + 0.05 * c);
    b.push_back(bl * (1 - 0.1 * c) + 0.05 * c);
  }
  EXPECT_NEAR(ssim(torch::stack(a, -1), torch::stack(b, -1)), 0.6728167676939466, 1e-6);
  auto ramp = torch::linspace(0, 1, 256, torch::kFloat64).view({16, 16});
  EXPECT_NEAR(ssim(ramp, 1 - ramp), -0.8262294226782463, 1e-6);
}

TEST(Ssim, IdentitySymmetryAndErrors) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(6);
  auto a = torch::rand({20, 24, 3}, gen, torch::kFloat64);
  auto b = torch::rand({20, 24, 3}, gen, torch::kFloat64);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_LT(ssim(a, 1 - a), 1.0);
  EXPECT_THROW(ssim(torch::rand({10, 10, 3}), torch::rand({10, 10, 3})), ShapeError);
  EXPECT_THROW(ssim(a, b.narrow(0, 0, 19)), ShapeError);
}

}  // namespace
}  // namespace viws
