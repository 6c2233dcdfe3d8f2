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
#include <optional>
#include <vector>

#include <json.hpp>

#include "viws/encoder.hpp"

namespace viws {

/// Clamp to [0, 1] in the forward pass; identity gradient in the backward pass.
torch::Tensor unit_clamp(const torch::Tensor& x);

struct DecoderConfig {
  int64_t num_blocks = 2;
  int64_t heads = 4;
  int64_t mlp_ratio = 2;
  std::vector<int64_t> fusion_channels{16, 24, 32, 48};  // one per encoder stage, finest first
  int64_t head_channels = 16;
  std::vector<int64_t> temporal_channels{16, 16};  // hidden widths of the three 3-D convs
  int64_t temporal_kernel = 3;
  double refine_scale = 0.5;

  void validate(int64_t num_stages) const;
  nlohmann::json to_json() const;
  static DecoderConfig from_json(const nlohmann::json& j);
};

/// Multi-head cross-attention; query and context share width.
class CrossAttentionImpl : public torch::nn::Module {
 public:
  CrossAttentionImpl(int64_t dim, int64_t heads);
  torch::Tensor forward(const torch::Tensor& query, const torch::Tensor& context);

  torch::nn::Linear q{nullptr};
  torch::nn::Linear kv{nullptr};
  torch::nn::Linear proj{nullptr};

 private:
  int64_t dim_;
  int64_t heads_;
};
TORCH_MODULE(CrossAttention);

/// Messengers query pixel tokens: m + XAttn(LN m, LN f), then m + MLP(LN m).
class RetrievalBlockImpl : public torch::nn::Module {
 public:
  RetrievalBlockImpl(int64_t dim, int64_t heads, int64_t mlp_ratio);
  torch::Tensor forward(const torch::Tensor& messengers, const torch::Tensor& pixels);

  torch::nn::LayerNorm norm_q{nullptr}, norm_kv{nullptr}, norm2{nullptr};
  CrossAttention attn{nullptr};
  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(RetrievalBlock);

/// Retrieves the weather-specific map r from final-stage pixels using the
/// encoder's messengers as queries, then lets pixels re-query the refined
/// messengers to place the result back on the grid.
class WeatherRetrievalImpl : public torch::nn::Module {
 public:
  WeatherRetrievalImpl(int64_t dim, const DecoderConfig& config);
  // features: (N, C, h, w); messengers: (N, M, C) -> r: (N, C, h, w)
  torch::Tensor forward(const torch::Tensor& features, const torch::Tensor& messengers);

  std::optional<int> masked_group;  // test hook: zero one messenger group

  std::vector<RetrievalBlock> blocks;
  torch::nn::LayerNorm norm_pixels{nullptr}, norm_messengers{nullptr};
  CrossAttention back_attn{nullptr};
};
TORCH_MODULE(WeatherRetrieval);

/// skip(x) + conv(GELU(conv(x))), 3x3 convs.
class ResidualConvPairImpl : public torch::nn::Module {
 public:
  ResidualConvPairImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d skip{nullptr}, conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ResidualConvPair);

/// Top-down pyramid: level N_s fuses [r, f^{N_s}], each finer level fuses the
/// x2-upsampled result with f^l, the remaining x2 steps reach the input
/// resolution where the frame itself is concatenated, and a 3-channel head
/// emits the residual map R.
class ConvProjectionImpl : public torch::nn::Module {
 public:
  ConvProjectionImpl(const std::vector<int64_t>& feature_channels, int64_t retrieval_channels,
                     const std::vector<int64_t>& fusion_channels, int64_t head_channels, int64_t stem_stride,
                     int64_t image_channels = 3);
  // retrieval may be undefined when retrieval_channels == 0.
  torch::Tensor forward(const torch::Tensor& retrieval, const std::vector<torch::Tensor>& features,
                        const torch::Tensor& frames);

  std::vector<ResidualConvPair> levels;   // coarsest first
  std::vector<ResidualConvPair> upsample; // stem-stride recovery steps
  torch::nn::Conv2d head{nullptr};

 private:
  int64_t retrieval_channels_;
};
TORCH_MODULE(ConvProjection);

/// Three 3-D convs over (time, H, W); the clip collapses to the centre frame
/// plus the last conv's centre output. The last conv starts at zero so the
/// block initially passes the centre recovery through.
class TemporalFusionImpl : public torch::nn::Module {
 public:
  TemporalFusionImpl(const std::vector<int64_t>& hidden_channels, int64_t kernel, int64_t image_channels = 3);
  // recoveries: (B, T, 3, H, W) -> (B, 3, H, W)
  torch::Tensor forward(const torch::Tensor& recoveries);

  std::vector<torch::nn::Conv3d> convs;
};
TORCH_MODULE(TemporalFusion);

/// Single-frame two-stage encoder + projection, no messengers; adds a
/// residual and clamps to [0, 1].
class RefineNetImpl : public torch::nn::Module {
 public:
  RefineNetImpl(const EncoderConfig& main_encoder, const DecoderConfig& decoder);
  torch::Tensor forward(const torch::Tensor& image);

  const EncoderConfig& encoder_config() const { return config_; }

  Encoder encoder{nullptr};
  ConvProjection projection{nullptr};

 private:
  EncoderConfig config_;
};
TORCH_MODULE(RefineNet);

struct DecoderOutput {
  torch::Tensor retrieval;   // r, (B*T, C, h, w); undefined without retrieval
  torch::Tensor residuals;   // R, (B, T, 3, H, W)
  torch::Tensor recoveries;  // clamp(I - R), (B, T, 3, H, W)
  torch::Tensor fused;       // (B, 3, H, W)
};

class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(const EncoderConfig& encoder, const DecoderConfig& config, bool use_retrieval);
  DecoderOutput forward(const EncoderOutput& encoded, const torch::Tensor& frames);

  WeatherRetrieval retrieval{nullptr};
  ConvProjection projection{nullptr};
  TemporalFusion fusion{nullptr};
};
TORCH_MODULE(Decoder);

}  // namespace viws
