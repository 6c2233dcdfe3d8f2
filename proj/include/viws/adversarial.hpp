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

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace viws {

/// Identity forward; multiplies the incoming gradient by -lambda.
torch::Tensor grl(const torch::Tensor& x, double lambda);

/// Domain-adaptation schedule 2/(1+exp(-10 p)) - 1. p outside [0,1] is
/// clamped with a warning on stderr.
double lambda_schedule(double p);

struct AdversarialConfig {
  int64_t descriptor_dim = 128;  // D_v
  int64_t attention_dim = 64;    // D_a
  std::vector<int64_t> taps{4};  // 1-based encoder stages fed to the discriminator

  void validate(int64_t num_stages) const;
  nlohmann::json to_json() const;
  static AdversarialConfig from_json(const nlohmann::json& j);
};

/// Spatial mean of each tapped feature map, concatenated, then a linear map to D_v.
class FrameDescriptorImpl : public torch::nn::Module {
 public:
  FrameDescriptorImpl(int64_t in_channels, int64_t descriptor_dim);
  // maps: (B*T, C_k, h_k, w_k) per tap -> (B, T, D_v)
  torch::Tensor forward(const std::vector<torch::Tensor>& maps, int64_t batch, int64_t frames);

  torch::nn::Linear proj{nullptr};
};
TORCH_MODULE(FrameDescriptor);

struct PoolResult {
  torch::Tensor pooled;   // (B, D_v)
  torch::Tensor weights;  // (B, T), sums to 1 along T
};

/// Gated attention pooling over frames:
///   a_i = softmax_i( w1^T (tanh(W2 v_i) * sigmoid(W3 v_i)) ),  v = sum_i a_i v_i
class GatedAttentionPoolImpl : public torch::nn::Module {
 public:
  GatedAttentionPoolImpl(int64_t descriptor_dim, int64_t attention_dim);
  // v: (B, T, D_v)
  PoolResult forward(const torch::Tensor& v);

  torch::nn::Linear w1{nullptr};  // D_a -> 1
  torch::nn::Linear w2{nullptr};  // D_v -> D_a (tanh branch)
  torch::nn::Linear w3{nullptr};  // D_v -> D_a (sigmoid gate)
};
TORCH_MODULE(GatedAttentionPool);

/// Descriptor -> gated pooling -> one affine layer to 3 weather logits.
class WeatherDiscriminatorImpl : public torch::nn::Module {
 public:
  WeatherDiscriminatorImpl(int64_t in_channels, const AdversarialConfig& config);
  torch::Tensor forward(const std::vector<torch::Tensor>& maps, int64_t batch, int64_t frames);

  FrameDescriptor descriptor{nullptr};
  GatedAttentionPool pool{nullptr};
  torch::nn::Linear classifier{nullptr};
};
TORCH_MODULE(WeatherDiscriminator);

/// Cross-entropy of (B, Q) logits against (B,) integer labels, batch mean.
torch::Tensor adversarial_loss(const torch::Tensor& logits, const torch::Tensor& labels);

}  // namespace viws
