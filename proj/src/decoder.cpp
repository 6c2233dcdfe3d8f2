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

#include "viws/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "viws/errors.hpp"

namespace viws {

using json = nlohmann::json;
namespace F = torch::nn::functional;

void DecoderConfig::validate(int64_t num_stages) const {
  if (static_cast<int64_t>(fusion_channels.size()) != num_stages)
    throw ConfigError("decoder fusion_channels must list one width per encoder stage");
  if (num_blocks < 0 || heads <= 0 || mlp_ratio < 1 || head_channels <= 0)
    throw ConfigError("decoder sizes must be positive");
  if (temporal_channels.size() != 2) throw ConfigError("temporal fusion takes exactly two hidden widths");
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0) throw ConfigError("temporal kernel must be odd");
  if (!(refine_scale > 0.0 && refine_scale < 1.0)) throw ConfigError("refine_scale must lie in (0, 1)");
}

json DecoderConfig::to_json() const {
  return {{"num_blocks", num_blocks},
          {"heads", heads},
          {"mlp_ratio", mlp_ratio},
          {"fusion_channels", fusion_channels},
          {"head_channels", head_channels},
          {"temporal_channels", temporal_channels},
          {"temporal_kernel", temporal_kernel},
          {"refine_scale", refine_scale}};
}

DecoderConfig DecoderConfig::from_json(const json& j) {
  DecoderConfig c;
  try {
    c.num_blocks = j.at("num_blocks").get<int64_t>();
    c.heads = j.at("heads").get<int64_t>();
    c.mlp_ratio = j.at("mlp_ratio").get<int64_t>();
    c.fusion_channels = j.at("fusion_channels").get<std::vector<int64_t>>();
    c.head_channels = j.at("head_channels").get<int64_t>();
    c.temporal_channels = j.at("temporal_channels").get<std::vector<int64_t>>();
    c.temporal_kernel = j.at("temporal_kernel").get<int64_t>();
    c.refine_scale = j.at("refine_scale").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed decoder config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------

CrossAttentionImpl::CrossAttentionImpl(int64_t dim, int64_t heads) : dim_(dim), heads_(heads) {
  if (dim % heads != 0) throw ConfigError("cross-attention width must divide into heads");
  q = register_module("q", torch::nn::Linear(dim, dim));
  kv = register_module("kv", torch::nn::Linear(dim, 2 * dim));
  proj = register_module("proj", torch::nn::Linear(dim, dim));
}

torch::Tensor CrossAttentionImpl::forward(const torch::Tensor& query, const torch::Tensor& context) {
  if (query.size(-1) != dim_ || context.size(-1) != dim_ || query.size(0) != context.size(0))
    throw ShapeError("cross-attention inputs must be (N, L, " + std::to_string(dim_) + ") with matching N");
  const int64_t N = query.size(0);
  const int64_t Lq = query.size(1);
  const int64_t Lk = context.size(1);
  const int64_t hd = dim_ / heads_;
  auto qh = q(query).view({N, Lq, heads_, hd}).transpose(1, 2);
  auto kvh = kv(context).view({N, Lk, 2, heads_, hd}).permute({2, 0, 3, 1, 4});
  auto attn = torch::softmax(torch::matmul(qh, kvh[0].transpose(-2, -1)) / std::sqrt(static_cast<double>(hd)), -1);
  auto out = torch::matmul(attn, kvh[1]).transpose(1, 2).reshape({N, Lq, dim_});
  return proj(out);
}

RetrievalBlockImpl::RetrievalBlockImpl(int64_t dim, int64_t heads, int64_t mlp_ratio) {
  norm_q = register_module("norm_q", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm_kv = register_module("norm_kv", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  attn = register_module("attn", CrossAttention(dim, heads));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  fc1 = register_module("fc1", torch::nn::Linear(dim, dim * mlp_ratio));
  fc2 = register_module("fc2", torch::nn::Linear(dim * mlp_ratio, dim));
}

torch::Tensor RetrievalBlockImpl::forward(const torch::Tensor& messengers, const torch::Tensor& pixels) {
  auto m = messengers + attn(norm_q(messengers), norm_kv(pixels));
  return m + fc2(F::gelu(fc1(norm2(m))));
}

WeatherRetrievalImpl::WeatherRetrievalImpl(int64_t dim, const DecoderConfig& config) {
  for (int64_t b = 0; b < config.num_blocks; ++b)
    blocks.push_back(register_module("block" + std::to_string(b + 1), RetrievalBlock(dim, config.heads, config.mlp_ratio)));
  norm_pixels = register_module("norm_pixels", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm_messengers = register_module("norm_messengers", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  back_attn = register_module("back_attn", CrossAttention(dim, config.heads));
}

torch::Tensor WeatherRetrievalImpl::forward(const torch::Tensor& features, const torch::Tensor& messengers) {
  if (features.dim() != 4 || messengers.dim() != 3 || features.size(0) != messengers.size(0) ||
      features.size(1) != messengers.size(2))
    throw ShapeError("retrieval expects features (N, C, h, w) and messengers (N, M, C)");
  auto pixels = map_to_tokens(features);
  auto m = messengers;
  if (masked_group) {
    const int64_t gsize = m.size(1) / kMessengerGroups;
    auto keep = torch::ones({1, m.size(1), 1}, m.options());
    keep.narrow(1, *masked_group * gsize, gsize).zero_();
    m = m * keep;
  }
  for (auto& block : blocks) m = block(m, pixels);
  auto r = back_attn(norm_pixels(pixels), norm_messengers(m));
  return tokens_to_map(r, features.size(2), features.size(3));
}

ResidualConvPairImpl::ResidualConvPairImpl(int64_t in_channels, int64_t out_channels) {
  if (in_channels != out_channels)
    skip = register_module("skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1)));
  conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
  conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)));
}

torch::Tensor ResidualConvPairImpl::forward(const torch::Tensor& x) {
  auto s = skip ? skip(x) : x;
  return s + conv2(F::gelu(conv1(x)));
}

namespace {

// Exact clamp to [0, 1] whose backward is the identity: saturated pixels
// still receive gradient, so an overshooting head can walk back.
class UnitClampFunction : public torch::autograd::Function<UnitClampFunction> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext*, const torch::Tensor& x) { return x.clamp(0.0, 1.0); }
  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext*, torch::autograd::tensor_list grads) {
    return {grads[0]};
  }
};

torch::Tensor up2(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

int64_t log2_exact(int64_t v) {
  int64_t n = 0;
  while ((int64_t{1} << n) < v) ++n;
  if ((int64_t{1} << n) != v) throw ConfigError("stem stride must be a power of two");
  return n;
}

}  // namespace

torch::Tensor unit_clamp(const torch::Tensor& x) { return UnitClampFunction::apply(x); }


ConvProjectionImpl::ConvProjectionImpl(const std::vector<int64_t>& feature_channels, int64_t retrieval_channels,
                                       const std::vector<int64_t>& fusion_channels, int64_t head_channels,
                                       int64_t stem_stride, int64_t image_channels)
    : retrieval_channels_(retrieval_channels) {
  const auto S = static_cast<int64_t>(feature_channels.size());
  if (static_cast<int64_t>(fusion_channels.size()) != S)
    throw ConfigError("projection pyramid length must equal the number of encoder stages");
  for (int64_t i = S - 1; i >= 0; --i) {
    const int64_t in = i == S - 1 ? feature_channels[i] + retrieval_channels : fusion_channels[i + 1] + feature_channels[i];
    levels.push_back(register_module("level" + std::to_string(i + 1), ResidualConvPair(in, fusion_channels[i])));
  }
  const int64_t steps = log2_exact(stem_stride);
  for (int64_t k = 0; k < steps; ++k) {
    int64_t in = k == 0 ? fusion_channels[0] : head_channels;
    if (k == steps - 1) in += image_channels;
    upsample.push_back(register_module("up" + std::to_string(k + 1), ResidualConvPair(in, head_channels)));
  }
  head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(head_channels, image_channels, 3).padding(1)));
}

torch::Tensor ConvProjectionImpl::forward(const torch::Tensor& retrieval, const std::vector<torch::Tensor>& features,
                                          const torch::Tensor& frames) {
  const auto S = static_cast<int64_t>(features.size());
  if (S != static_cast<int64_t>(levels.size())) throw ShapeError("projection got the wrong number of feature maps");
  torch::Tensor x = features.back();
  if (retrieval_channels_ > 0) {
    if (!retrieval.defined() || !retrieval.sizes().slice(2).equals(x.sizes().slice(2)))
      throw ShapeError("weather-specific feature must match final-stage resolution");
    x = torch::cat({retrieval, x}, 1);
  }
  x = levels[0](x);
  for (int64_t i = S - 2, j = 1; i >= 0; --i, ++j) {
    x = up2(x);
    if (!x.sizes().slice(2).equals(features[i].sizes().slice(2)))
      throw ShapeError("feature resolution mismatch at stage " + std::to_string(i + 1));
    x = levels[j](torch::cat({x, features[i]}, 1));
  }
  for (size_t k = 0; k < upsample.size(); ++k) {
    x = up2(x);
    if (k + 1 == upsample.size()) {
      if (!x.sizes().slice(2).equals(frames.sizes().slice(2))) throw ShapeError("projection output misses input resolution");
      x = torch::cat({x, frames}, 1);
    }
    x = upsample[k](x);
  }
  return head(x);
}

TemporalFusionImpl::TemporalFusionImpl(const std::vector<int64_t>& hidden_channels, int64_t kernel,
                                       int64_t image_channels) {
  const std::vector<int64_t> widths{image_channels, hidden_channels.at(0), hidden_channels.at(1), image_channels};
  for (size_t i = 0; i < 3; ++i)
    convs.push_back(register_module(
        "conv" + std::to_string(i + 1),
        torch::nn::Conv3d(torch::nn::Conv3dOptions(widths[i], widths[i + 1], {kernel, 3, 3}).padding({kernel / 2, 1, 1}))));
}

torch::Tensor TemporalFusionImpl::forward(const torch::Tensor& recoveries) {
  if (recoveries.dim() != 5) throw ShapeError("temporal fusion expects (B, T, C, H, W)");
  const int64_t T = recoveries.size(1);
  if (T < 3) throw ConfigError("temporal fusion needs at least 3 frames, got " + std::to_string(T));
  auto x = recoveries.permute({0, 2, 1, 3, 4});
  x = F::gelu(convs[0](x));
  x = F::gelu(convs[1](x));
  x = convs[2](x);
  const int64_t c = T / 2;
  return recoveries.select(1, c) + x.select(2, c);
}

namespace {

EncoderConfig refine_encoder_config(const EncoderConfig& main, double scale) {
  EncoderConfig c;
  const int64_t stages = std::min<int64_t>(2, main.num_stages());
  c.blocks_per_stage.assign(stages, 1);
  c.channels.clear();
  c.heads.clear();
  c.reduction_ratios.clear();
  for (int64_t i = 0; i < stages; ++i) {
    const int64_t heads = i == 0 ? 1 : 2;
    int64_t ch = static_cast<int64_t>(std::lround(scale * static_cast<double>(main.channels[i])));
    ch = std::max<int64_t>(ch, 2 * heads);
    ch = (ch + heads - 1) / heads * heads;
    if (!c.channels.empty() && ch <= c.channels.back()) ch = c.channels.back() + heads;
    c.channels.push_back(ch);
    c.heads.push_back(heads);
    c.reduction_ratios.push_back(main.reduction_ratios[i]);
  }
  c.mlp_ratio = 2;
  c.in_channels = main.in_channels;
  c.stem = main.stem;
  c.merge = main.merge;
  c.num_messengers = 0;
  c.temporal_shift = false;
  return c;
}

}  // namespace

RefineNetImpl::RefineNetImpl(const EncoderConfig& main_encoder, const DecoderConfig& decoder)
    : config_(refine_encoder_config(main_encoder, decoder.refine_scale)) {
  encoder = register_module("encoder", Encoder(config_));
  std::vector<int64_t> fusion;
  for (int64_t i = 0; i < config_.num_stages(); ++i)
    fusion.push_back(std::max<int64_t>(2, std::lround(decoder.refine_scale * static_cast<double>(decoder.fusion_channels[i]))));
  const int64_t head = std::max<int64_t>(2, std::lround(decoder.refine_scale * static_cast<double>(decoder.head_channels)));
  projection = register_module("projection", ConvProjection(config_.channels, 0, fusion, head, config_.stem.stride,
                                                            main_encoder.in_channels));
}

torch::Tensor RefineNetImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4) throw ShapeError("refinement expects (B, 3, H, W)");
  auto enc = encoder(image.unsqueeze(1), torch::Tensor());
  auto residual = projection(torch::Tensor(), enc.features, image);
  return unit_clamp(image + residual);
}

DecoderImpl::DecoderImpl(const EncoderConfig& encoder, const DecoderConfig& config, bool use_retrieval) {
  config.validate(encoder.num_stages());
  const int64_t top = encoder.channels.back();
  if (use_retrieval) {
    if (encoder.num_messengers == 0) throw ConfigError("messenger retrieval needs encoder messengers");
    retrieval = register_module("retrieval", WeatherRetrieval(top, config));
  }
  projection = register_module("projection", ConvProjection(encoder.channels, use_retrieval ? top : 0,
                                                            config.fusion_channels, config.head_channels,
                                                            encoder.stem.stride, encoder.in_channels));
  fusion = register_module("fusion", TemporalFusion(config.temporal_channels, config.temporal_kernel, encoder.in_channels));
}

DecoderOutput DecoderImpl::forward(const EncoderOutput& encoded, const torch::Tensor& frames) {
  const int64_t B = frames.size(0);
  const int64_t T = frames.size(1);
  auto flat = frames.reshape({B * T, frames.size(2), frames.size(3), frames.size(4)});
  DecoderOutput out;
  if (retrieval) {
    const auto& m = encoded.messengers;
    out.retrieval = retrieval(encoded.features.back(), m.reshape({B * T, m.size(2), m.size(3)}));
  }
  out.residuals = projection(out.retrieval, encoded.features, flat).view(frames.sizes());
  out.recoveries = unit_clamp(frames - out.residuals);
  out.fused = fusion(out.recoveries);
  return out;
}

}  // namespace viws
