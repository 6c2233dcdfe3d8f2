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

#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "viws/data.hpp"

namespace viws {

struct LossWeights {
  double gamma1 = 0.04;   // perceptual
  double gamma2 = 0.001;  // adversarial
};

/// Elementwise 0.5 d^2 (|d| < 1) or |d| - 0.5, averaged over all elements.
torch::Tensor smooth_l1(const torch::Tensor& pred, const torch::Tensor& gt);

struct PerceptualConfig {
  // Widths of the three VGG-style blocks (2, 2 and 3 convs). VGG16 uses 64/128/256.
  std::array<int64_t, 3> channels{8, 16, 32};
  uint64_t seed = 1234;
  bool linear = false;  // identity activations; used to probe second-order behaviour
  std::optional<std::filesystem::path> weights;  // pretrained tensors (tensor archive) if available

  nlohmann::json to_json() const;
  static PerceptualConfig from_json(const nlohmann::json& j);
};

/// Frozen VGG-shaped conv stack; features are tapped after layers 3, 8 and
/// 15 of the sequential layout (the ReLUs ending each of the first three
/// blocks in VGG16).
class PerceptualExtractorImpl : public torch::nn::Module {
 public:
  explicit PerceptualExtractorImpl(PerceptualConfig config = {});
  // x: (B, 3, H, W) -> three tap maps
  std::vector<torch::Tensor> forward(const torch::Tensor& x);

  static constexpr std::array<int64_t, 3> kTapPoints{3, 8, 15};
  torch::nn::Sequential layers{nullptr};

 private:
  PerceptualConfig config_;
};
TORCH_MODULE(PerceptualExtractor);

/// Mean over the three taps of the MSE between tap feature maps.
torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& gt, PerceptualExtractor& extractor);

struct LossBreakdown {
  torch::Tensor smooth_l1;
  torch::Tensor perceptual;
  torch::Tensor adversarial;  // zero when no logits were given
  torch::Tensor supervised;   // smooth_l1 + gamma1 * perceptual
  torch::Tensor total;        // supervised + gamma2 * adversarial
};

/// `logits` may be undefined (no discriminator); the adversarial term is then 0.
LossBreakdown total_loss(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& logits,
                         const torch::Tensor& labels, const LossWeights& weights, PerceptualExtractor& extractor);

/// Sentinel PSNR for identical frames.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) over all values, data range 1. Inputs are clamped to [0,1].
double psnr(const FramePair& pair);
double psnr(const torch::Tensor& prediction, const torch::Tensor& ground_truth);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01,
/// K2=0.03, data range 1, averaged over valid windows and channels.
/// Frames are (H, W, 3) or (H, W).
double ssim(const FramePair& pair);
double ssim(const torch::Tensor& prediction, const torch::Tensor& ground_truth);

}  // namespace viws
