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

#include "viws/encoder.hpp"

#include <cmath>

#include "viws/errors.hpp"

namespace viws {

using json = nlohmann::json;
namespace F = torch::nn::functional;

// ---------------------------------------------------------------------------
// Config

int64_t EncoderConfig::total_stride() const { return stem.stride * (int64_t{1} << (num_stages() - 1)); }

void EncoderConfig::validate() const {
  const auto n = static_cast<size_t>(num_stages());
  if (n == 0) throw ConfigError("encoder needs at least one stage");
  if (blocks_per_stage.size() != n || heads.size() != n || reduction_ratios.size() != n)
    throw ConfigError("encoder stage lists (blocks, channels, heads, reduction_ratios) differ in length");
  for (size_t i = 0; i < n; ++i) {
    if (channels[i] <= 0 || blocks_per_stage[i] <= 0 || heads[i] <= 0)
      throw ConfigError("encoder stage sizes must be positive");
    if (i > 0 && channels[i] <= channels[i - 1]) throw ConfigError("encoder channels must be strictly increasing");
    const int64_t groups = heads[i] >= 2 ? 2 : 1;
    if (heads[i] % groups != 0 || channels[i] % heads[i] != 0)
      throw ConfigError("stage " + std::to_string(i + 1) + ": channels must divide evenly into heads and head groups");
    if (reduction_ratios[i].first < 1 || reduction_ratios[i].second < 1)
      throw ConfigError("reduction ratios must be >= 1");
  }
  if (num_messengers < 0 || num_messengers % kMessengerGroups != 0)
    throw ConfigError("num_messengers must be a nonnegative multiple of 6");
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
}

EncoderConfig EncoderConfig::desk() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::full() {
  EncoderConfig c;
  c.channels = {64, 128, 256, 512};
  c.heads = {2, 4, 8, 16};
  c.blocks_per_stage = {1, 2, 4, 1};
  return c;
}

EncoderConfig EncoderConfig::toy() {
  EncoderConfig c;
  c.blocks_per_stage = {1, 1, 1};
  c.channels = {4, 8, 12};
  c.heads = {1, 2, 2};
  c.reduction_ratios = {{2, 2}, {2, 1}, {1, 1}};
  c.mlp_ratio = 2;
  c.num_messengers = 6;
  return c;
}

namespace {

json ratios_json(const std::vector<std::pair<int64_t, int64_t>>& r) {
  json a = json::array();
  for (const auto& [x, y] : r) a.push_back({x, y});
  return a;
}

json conv_json(const ConvSpec& c) { return {{"kernel", c.kernel}, {"stride", c.stride}, {"padding", c.padding}}; }

ConvSpec conv_from(const json& j) {
  return {j.at("kernel").get<int64_t>(), j.at("stride").get<int64_t>(), j.at("padding").get<int64_t>()};
}

}  // namespace

json EncoderConfig::to_json() const {
  return {{"blocks_per_stage", blocks_per_stage},
          {"channels", channels},
          {"heads", heads},
          {"reduction_ratios", ratios_json(reduction_ratios)},
          {"mlp_ratio", mlp_ratio},
          {"in_channels", in_channels},
          {"patch_embed", {{"stem", conv_json(stem)}, {"merge", conv_json(merge)}}},
          {"num_messengers", num_messengers},
          {"shift_plan", shift_plan.to_json()},
          {"temporal_shift", temporal_shift},
          {"shift_per_block", shift_per_block}};
}

EncoderConfig EncoderConfig::from_json(const json& j) {
  EncoderConfig c;
  try {
    c.blocks_per_stage = j.at("blocks_per_stage").get<std::vector<int64_t>>();
    c.channels = j.at("channels").get<std::vector<int64_t>>();
    c.heads = j.at("heads").get<std::vector<int64_t>>();
    c.reduction_ratios.clear();
    for (const auto& r : j.at("reduction_ratios")) c.reduction_ratios.emplace_back(r.at(0).get<int64_t>(), r.at(1).get<int64_t>());
    c.mlp_ratio = j.at("mlp_ratio").get<int64_t>();
    c.in_channels = j.value("in_channels", int64_t{3});
    c.stem = conv_from(j.at("patch_embed").at("stem"));
    c.merge = conv_from(j.at("patch_embed").at("merge"));
    c.num_messengers = j.at("num_messengers").get<int64_t>();
    c.shift_plan = ShiftPlan::from_json(j.at("shift_plan"));
    c.temporal_shift = j.at("temporal_shift").get<bool>();
    c.shift_per_block = j.at("shift_per_block").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Helpers

torch::Tensor tokens_to_map(const torch::Tensor& tokens, int64_t h, int64_t w) {
  if (tokens.size(1) != h * w)
    throw ShapeError("token count " + std::to_string(tokens.size(1)) + " does not factor into " + std::to_string(h) +
                     "x" + std::to_string(w));
  return tokens.transpose(1, 2).reshape({tokens.size(0), tokens.size(2), h, w});
}

torch::Tensor map_to_tokens(const torch::Tensor& map) { return map.flatten(2).transpose(1, 2); }

// ---------------------------------------------------------------------------
// Modules

PatchEmbedImpl::PatchEmbedImpl(int64_t in_channels, int64_t out_channels, ConvSpec spec) {
  proj = register_module(
      "proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, spec.kernel)
                                    .stride(spec.stride)
                                    .padding(spec.padding)));
}

torch::Tensor PatchEmbedImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != proj->options.in_channels())
    throw ShapeError("patch embedding expects (N, " + std::to_string(proj->options.in_channels()) + ", H, W)");
  return proj(x);
}

ShuntedAttentionImpl::ShuntedAttentionImpl(int64_t dim, int64_t heads, std::pair<int64_t, int64_t> ratios)
    : dim_(dim), heads_(heads) {
  const int64_t groups = heads >= 2 ? 2 : 1;
  ratios_ = groups == 2 ? std::vector<int64_t>{ratios.first, ratios.second} : std::vector<int64_t>{ratios.first};
  const int64_t group_dim = dim / groups;
  q = register_module("q", torch::nn::Linear(dim, dim));
  for (int64_t g = 0; g < groups; ++g) {
    const auto sfx = std::to_string(g + 1);
    if (ratios_[g] > 1) {
      reduce_.push_back(register_module(
          "sr" + sfx, torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, dim, ratios_[g]).stride(ratios_[g]))));
      reduce_norm_.push_back(register_module("sr_norm" + sfx, torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}))));
    } else {
      reduce_.push_back(nullptr);
      reduce_norm_.push_back(nullptr);
    }
    kv_.push_back(register_module("kv" + sfx, torch::nn::Linear(dim, 2 * group_dim)));
  }
  proj = register_module("proj", torch::nn::Linear(dim, dim));
}

torch::Tensor ShuntedAttentionImpl::forward(const torch::Tensor& x, int64_t h, int64_t w) {
  if (x.dim() != 3 || x.size(2) != dim_) throw ShapeError("attention width mismatch: expected " + std::to_string(dim_));
  const int64_t N = x.size(0);
  const int64_t S = x.size(1);
  const int64_t L = h * w;
  if (S < L) throw ShapeError("sequence shorter than the pixel grid");
  const int64_t hd = dim_ / heads_;
  const int64_t hpg = heads_per_group();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  auto pixel = x.narrow(1, 0, L);
  auto messenger = x.narrow(1, L, S - L);
  auto q_all = q(x).view({N, S, heads_, hd}).transpose(1, 2);  // (N, heads, S, hd)

  std::vector<torch::Tensor> outs;
  for (int64_t g = 0; g < num_groups(); ++g) {
    torch::Tensor src = pixel;
    if (reduce_[g]) {
      if (h % ratios_[g] != 0 || w % ratios_[g] != 0)
        throw ShapeError("pixel grid " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by rate " +
                         std::to_string(ratios_[g]));
      src = map_to_tokens(reduce_[g](tokens_to_map(pixel, h, w)));
      src = F::gelu(reduce_norm_[g](src));
    }
    if (!hooks.drop_messenger_kv && messenger.size(1) > 0) src = torch::cat({src, messenger}, 1);
    const int64_t Lk = src.size(1);
    auto kv = kv_[g](src).view({N, Lk, 2, hpg, hd}).permute({2, 0, 3, 1, 4});  // (2, N, hpg, Lk, hd)
    auto k = kv[0];
    auto v = kv[1];
    auto qg = q_all.narrow(1, g * hpg, hpg);
    torch::Tensor attn;
    if (hooks.uniform_weights) {
      attn = torch::full({N, hpg, S, Lk}, 1.0 / static_cast<double>(Lk), v.options());
    } else {
      attn = torch::softmax(torch::matmul(qg, k.transpose(-2, -1)) * scale, -1);
    }
    outs.push_back(torch::matmul(attn, v));  // (N, hpg, S, hd)
  }
  auto out = torch::cat(outs, 1).transpose(1, 2).reshape({N, S, dim_});
  return proj(out);
}

DetailFeedForwardImpl::DetailFeedForwardImpl(int64_t dim, int64_t hidden) {
  fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
  dwconv = register_module("dwconv", torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden, hidden, 3).padding(1).groups(hidden)));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor DetailFeedForwardImpl::forward(const torch::Tensor& x, int64_t h, int64_t w) {
  const int64_t L = h * w;
  if (x.dim() != 3 || x.size(1) < L) throw ShapeError("feed-forward input does not hold the pixel grid");
  auto y = fc1(x);
  auto pixel = map_to_tokens(dwconv(tokens_to_map(y.narrow(1, 0, L), h, w)));
  if (x.size(1) > L) y = torch::cat({pixel, y.narrow(1, L, x.size(1) - L)}, 1);
  else y = pixel;
  return fc2(F::gelu(y));
}

EncoderBlockImpl::EncoderBlockImpl(int64_t dim, int64_t heads, std::pair<int64_t, int64_t> ratios, int64_t mlp_ratio) {
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  attn = register_module("attn", ShuntedAttention(dim, heads, ratios));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  ffn = register_module("ffn", DetailFeedForward(dim, dim * mlp_ratio));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& x, int64_t h, int64_t w) {
  auto y = x + attn(norm1(x), h, w);
  return y + ffn(norm2(y), h, w);
}

EncoderStageImpl::EncoderStageImpl(const EncoderConfig& config, int64_t index) {
  const int64_t dim = config.channels[index];
  if (index > 0) {
    const int64_t prev = config.channels[index - 1];
    merge = register_module("merge", torch::nn::Conv2d(torch::nn::Conv2dOptions(prev, dim, config.merge.kernel)
                                                           .stride(config.merge.stride)
                                                           .padding(config.merge.padding)));
    merge_norm = register_module("merge_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    if (config.num_messengers > 0) messenger_proj = register_module("messenger_proj", torch::nn::Linear(prev, dim));
  }
  for (int64_t b = 0; b < config.blocks_per_stage[index]; ++b)
    blocks.push_back(register_module("block" + std::to_string(b + 1),
                                     EncoderBlock(dim, config.heads[index], config.reduction_ratios[index], config.mlp_ratio)));
  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
}

EncoderImpl::EncoderImpl(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  stem = register_module("stem", PatchEmbed(config_.in_channels, config_.channels[0], config_.stem));
  for (int64_t l = 0; l < config_.num_stages(); ++l)
    stages.push_back(register_module("stage" + std::to_string(l + 1), EncoderStage(config_, l)));
}

void EncoderImpl::set_hooks(const AttentionHooks& hooks) {
  for (auto& s : stages)
    for (auto& b : s->blocks) b->attn->hooks = hooks;
}

EncoderOutput EncoderImpl::forward(const torch::Tensor& frames, const torch::Tensor& messengers) {
  if (frames.dim() != 5 || frames.size(2) != config_.in_channels)
    throw ShapeError("encoder expects frames (B, T, " + std::to_string(config_.in_channels) + ", H, W)");
  const int64_t B = frames.size(0);
  const int64_t T = frames.size(1);
  const int64_t H = frames.size(3);
  const int64_t W = frames.size(4);
  const int64_t stride = config_.total_stride();
  if (H % stride != 0 || W % stride != 0)
    throw ShapeError("frame size " + std::to_string(H) + "x" + std::to_string(W) + " not divisible by " +
                     std::to_string(stride));
  const int64_t M = config_.num_messengers;

  torch::Tensor msg;
  if (M > 0) {
    if (!messengers.defined()) throw ShapeError("encoder configured with messengers but none given");
    auto m = messengers.dim() == 3 ? messengers.unsqueeze(0).expand({B, -1, -1, -1}) : messengers;
    if (m.dim() != 4 || m.size(0) != B || m.size(1) != T || m.size(2) != M || m.size(3) != config_.channels[0])
      throw ShapeError("messenger tokens must be (T, M, C_1) = (" + std::to_string(T) + ", " + std::to_string(M) +
                       ", " + std::to_string(config_.channels[0]) + ")");
    msg = m.reshape({B * T, M, config_.channels[0]});
  }
  const bool shifting = M > 0 && config_.temporal_shift && !config_.shift_per_block;
  const bool shifting_blocks = M > 0 && config_.temporal_shift && config_.shift_per_block;
  auto shift = [&](const torch::Tensor& t, bool back) {
    auto v = t.view({B, T, M, t.size(2)});
    v = back ? temporal_shiftback(v, config_.shift_plan) : temporal_shift(v, config_.shift_plan);
    return v.reshape({B * T, M, t.size(2)});
  };

  EncoderOutput out;
  out.batch = B;
  out.frames = T;
  auto map = stem(frames.reshape({B * T, config_.in_channels, H, W}));
  for (int64_t l = 0; l < config_.num_stages(); ++l) {
    auto& stage = stages[l];
    if (l > 0) {
      map = stage->merge(map);
      if (M > 0) msg = stage->messenger_proj(msg);
    }
    const int64_t h = map.size(2);
    const int64_t w = map.size(3);
    const int64_t L = h * w;
    auto tokens = map_to_tokens(map);
    if (l > 0) tokens = stage->merge_norm(tokens);
    if (shifting) msg = shift(msg, false);
    for (auto& block : stage->blocks) {
      if (shifting_blocks) msg = shift(msg, false);
      auto joint = M > 0 ? torch::cat({tokens, msg}, 1) : tokens;
      joint = block(joint, h, w);
      tokens = joint.narrow(1, 0, L);
      if (M > 0) msg = joint.narrow(1, L, M);
      if (shifting_blocks) msg = shift(msg, true);
    }
    if (shifting) msg = shift(msg, true);
    map = tokens_to_map(stage->norm(tokens), h, w);
    out.features.push_back(map);
  }
  if (M > 0) out.messengers = msg.reshape({B, T, M, msg.size(2)});
  return out;
}

}  // namespace viws
