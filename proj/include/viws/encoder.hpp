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
#include <utility>
#include <vector>

#include <json.hpp>

#include "viws/messenger.hpp"

namespace viws {

struct ConvSpec {
  int64_t kernel = 3;
  int64_t stride = 2;
  int64_t padding = 1;
};

/// Hierarchical shunted-transformer layout. Stage 1 embeds with `stem`
/// (x4 stride); every later stage merges patches with `merge` (x2 stride).
struct EncoderConfig {
  std::vector<int64_t> blocks_per_stage{2, 2, 2, 2};
  std::vector<int64_t> channels{16, 32, 64, 128};
  std::vector<int64_t> heads{1, 2, 4, 8};
  std::vector<std::pair<int64_t, int64_t>> reduction_ratios{{8, 4}, {4, 2}, {2, 1}, {1, 1}};
  int64_t mlp_ratio = 4;
  int64_t in_channels = 3;
  ConvSpec stem{7, 4, 3};
  ConvSpec merge{3, 2, 1};
  int64_t num_messengers = 48;  // 0 disables messenger tokens
  ShiftPlan shift_plan = ShiftPlan::default_plan();
  bool temporal_shift = true;
  bool shift_per_block = false;  // shift/shiftback around every block instead of once per stage

  int64_t num_stages() const { return static_cast<int64_t>(channels.size()); }
  /// Spatial divisor the input must satisfy: stem stride times 2^(N_s-1).
  int64_t total_stride() const;
  void validate() const;

  static EncoderConfig desk();
  static EncoderConfig full();
  /// Three stages sized for finite-difference checks on 16x16 frames.
  static EncoderConfig toy();

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

/// Test hooks for attention; all off in normal operation.
struct AttentionHooks {
  bool uniform_weights = false;  // replace softmax weights with 1/L_kv
  bool drop_messenger_kv = false;  // exclude messenger tokens from K/V
};

class PatchEmbedImpl : public torch::nn::Module {
 public:
  PatchEmbedImpl(int64_t in_channels, int64_t out_channels, ConvSpec spec);
  // (N, C_in, H, W) -> (N, C_out, H/s, W/s)
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d proj{nullptr};
};
TORCH_MODULE(PatchEmbed);

/// Multi-head attention over [pixel, messenger] tokens where head groups see
/// pixel K/V aggregated at different rates. Messengers join every group's K/V
/// at full resolution. With a single head only the first rate is used.
class ShuntedAttentionImpl : public torch::nn::Module {
 public:
  ShuntedAttentionImpl(int64_t dim, int64_t heads, std::pair<int64_t, int64_t> ratios);

  // x: (N, L + M, C) with the first L = h*w tokens spatial.
  torch::Tensor forward(const torch::Tensor& x, int64_t h, int64_t w);

  int64_t dim() const { return dim_; }
  int64_t num_groups() const { return static_cast<int64_t>(kv_.size()); }
  int64_t heads_per_group() const { return heads_ / num_groups(); }
  int64_t ratio(int64_t g) const { return ratios_[g]; }

  AttentionHooks hooks;

  torch::nn::Linear q{nullptr};
  torch::nn::Linear proj{nullptr};
  std::vector<torch::nn::Linear> kv_;
  // Per group: strided conv + norm aggregating pixel tokens (null at rate 1).
  std::vector<torch::nn::Conv2d> reduce_;
  std::vector<torch::nn::LayerNorm> reduce_norm_;

 private:
  int64_t dim_;
  int64_t heads_;
  std::vector<int64_t> ratios_;
};
TORCH_MODULE(ShuntedAttention);

/// fc1 -> depth-wise 3x3 conv on the pixel grid -> GELU -> fc2. Messenger
/// tokens take the same MLP without the spatial conv.
class DetailFeedForwardImpl : public torch::nn::Module {
 public:
  DetailFeedForwardImpl(int64_t dim, int64_t hidden);
  torch::Tensor forward(const torch::Tensor& x, int64_t h, int64_t w);

  torch::nn::Linear fc1{nullptr};
  torch::nn::Conv2d dwconv{nullptr};
  torch::nn::Linear fc2{nullptr};
};
TORCH_MODULE(DetailFeedForward);

/// Pre-norm residual block: x + SSA(LN x), then x + DSF(LN x).
class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(int64_t dim, int64_t heads, std::pair<int64_t, int64_t> ratios, int64_t mlp_ratio);
  torch::Tensor forward(const torch::Tensor& x, int64_t h, int64_t w);

  torch::nn::LayerNorm norm1{nullptr};
  ShuntedAttention attn{nullptr};
  torch::nn::LayerNorm norm2{nullptr};
  DetailFeedForward ffn{nullptr};
};
TORCH_MODULE(EncoderBlock);

struct EncoderOutput {
  std::vector<torch::Tensor> features;  // f^l as (B*T, C_l, h_l, w_l)
  torch::Tensor messengers;             // m^{N_s} as (B, T, M, C_{N_s}); undefined when M = 0
  int64_t batch = 0;
  int64_t frames = 0;
};

/// One hierarchy level. Stages after the first start by merging patches
/// (x2 down) and projecting messengers to the new width.
class EncoderStageImpl : public torch::nn::Module {
 public:
  EncoderStageImpl(const EncoderConfig& config, int64_t index);

  torch::nn::Conv2d merge{nullptr};
  torch::nn::LayerNorm merge_norm{nullptr};
  torch::nn::Linear messenger_proj{nullptr};
  std::vector<EncoderBlock> blocks;
  torch::nn::LayerNorm norm{nullptr};
};
TORCH_MODULE(EncoderStage);

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(EncoderConfig config);

  // frames: (B, T, C_in, H, W); messengers: (T, M, C_1) or (B, T, M, C_1),
  // ignored (may be undefined) when the config has no messengers.
  EncoderOutput forward(const torch::Tensor& frames, const torch::Tensor& messengers);

  const EncoderConfig& config() const { return config_; }
  void set_hooks(const AttentionHooks& hooks);

  PatchEmbed stem{nullptr};
  std::vector<EncoderStage> stages;

 private:
  EncoderConfig config_;
};
TORCH_MODULE(Encoder);

/// (N, L, C) tokens -> (N, C, h, w) map and back.
torch::Tensor tokens_to_map(const torch::Tensor& tokens, int64_t h, int64_t w);
torch::Tensor map_to_tokens(const torch::Tensor& map);

}  // namespace viws
