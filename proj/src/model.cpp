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

#include "viws/model.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "viws/errors.hpp"
#include "viws/util.hpp"

namespace viws {

using json = nlohmann::json;

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate(encoder.num_stages());
  adversarial.validate(encoder.num_stages());
  if (clip_length < 1) throw ConfigError("clip_length must be positive");
  if (use_messengers != (encoder.num_messengers > 0))
    throw ConfigError("use_messengers must agree with encoder.num_messengers > 0");
  if (use_retrieval && !use_messengers) throw ConfigError("the retrieval decoder needs messengers");
}

json ModelConfig::to_json() const {
  return {{"encoder", encoder.to_json()},   {"decoder", decoder.to_json()},
          {"adversarial", adversarial.to_json()}, {"clip_length", clip_length},
          {"use_messengers", use_messengers}, {"use_retrieval", use_retrieval},
          {"use_adversarial", use_adversarial}, {"init_seed", init_seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.encoder = EncoderConfig::from_json(j.at("encoder"));
    c.decoder = DecoderConfig::from_json(j.at("decoder"));
    c.adversarial = AdversarialConfig::from_json(j.at("adversarial"));
    c.clip_length = j.at("clip_length").get<int64_t>();
    c.use_messengers = j.at("use_messengers").get<bool>();
    c.use_retrieval = j.at("use_retrieval").get<bool>();
    c.use_adversarial = j.at("use_adversarial").get<bool>();
    c.init_seed = j.value("init_seed", uint64_t{0});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

uint64_t ModelConfig::hash() const {
  auto j = to_json();
  j.erase("init_seed");
  return fnv1a(j.dump());
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.encoder = EncoderConfig::full();
  c.decoder.heads = 8;
  c.decoder.fusion_channels = {32, 64, 96, 128};
  c.decoder.head_channels = 32;
  c.adversarial.descriptor_dim = 256;
  c.adversarial.attention_dim = 128;
  return c;
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.encoder = EncoderConfig::toy();
  c.decoder.num_blocks = 1;
  c.decoder.heads = 2;
  c.decoder.mlp_ratio = 2;
  c.decoder.fusion_channels = {4, 6, 8};
  c.decoder.head_channels = 4;
  c.decoder.temporal_channels = {4, 4};
  c.adversarial = {8, 4, {3}};
  c.clip_length = 3;
  return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "full") return full();
  if (name == "toy") return toy();
  throw ConfigError("unknown model preset '" + name + "' (expected desk, full or toy)");
}

ModelConfig ModelConfig::with_variant(const std::string& variant) const {
  ModelConfig c = *this;
  if (variant == "full") {
  } else if (variant == "no_messenger") {
    c.encoder.num_messengers = 0;
    c.use_messengers = false;
    c.use_retrieval = false;
    c.use_adversarial = false;
  } else if (variant == "no_adversarial") {
    c.use_adversarial = false;
  } else {
    throw ConfigError("unknown model variant '" + variant + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------

namespace {

void init_module(torch::nn::Module& m, at::Generator& gen) {
  torch::NoGradGuard no_grad;
  if (auto* lin = m.as<torch::nn::Linear>()) {
    trunc_normal_(lin->weight, 0.02, &gen);
    if (lin->bias.defined()) lin->bias.zero_();
  } else if (auto* conv = m.as<torch::nn::Conv2d>()) {
    // Kaiming fan-in: the decoder concatenates wide skips into narrow convs,
    // where fan-out scaling inflates activations level after level.
    const auto& k = conv->options.kernel_size();
    const double fan_in = static_cast<double>((*k)[0] * (*k)[1] * conv->options.in_channels()) /
                          static_cast<double>(conv->options.groups());
    conv->weight.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
    if (conv->bias.defined()) conv->bias.zero_();
  } else if (auto* conv3 = m.as<torch::nn::Conv3d>()) {
    const auto& k = conv3->options.kernel_size();
    const double fan_in = static_cast<double>((*k)[0] * (*k)[1] * (*k)[2] * conv3->options.in_channels());
    conv3->weight.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
    if (conv3->bias.defined()) conv3->bias.zero_();
  } else if (auto* ln = m.as<torch::nn::LayerNorm>()) {
    ln->weight.fill_(1.0);
    ln->bias.zero_();
  }
}

void zero_param(torch::Tensor& t) {
  torch::NoGradGuard no_grad;
  if (t.defined()) t.zero_();
}

}  // namespace

void init_weights(torch::nn::Module& module, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  init_module(module, gen);
  for (auto& child : module.modules(/*include_self=*/false)) init_module(*child, gen);
  // Residual branches of the norm-free conv pairs start small.
  torch::NoGradGuard no_grad;
  auto scale_pair = [](torch::nn::Module& m) {
    if (auto* pair = m.as<ResidualConvPair>()) pair->conv2->weight.mul_(0.1);
  };
  scale_pair(module);
  for (auto& child : module.modules(/*include_self=*/false)) scale_pair(*child);
}

void init_weights(torch::nn::Module& module) { init_weights(module, 0); }

int64_t count_parameters(const torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

ViWSNetImpl::ViWSNetImpl(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  encoder = register_module("encoder", Encoder(config_.encoder));
  decoder = register_module("decoder", Decoder(config_.encoder, config_.decoder, config_.use_retrieval));
  refine = register_module("refine", RefineNet(config_.encoder, config_.decoder));
  if (config_.use_adversarial) {
    int64_t in = 0;
    for (auto t : config_.adversarial.taps) in += config_.encoder.channels[t - 1];
    discriminator = register_module("discriminator", WeatherDiscriminator(in, config_.adversarial));
  }
  init_weights(*this, splitmix64(config_.init_seed));
  if (config_.use_messengers) {
    auto m = init_messengers(config_.encoder.num_messengers, config_.encoder.channels[0], config_.clip_length,
                             splitmix64(config_.init_seed ^ 0x6d657373ull));
    messengers = register_parameter("messengers", m.tokens);
  }
  zero_emission_heads();
}

void ViWSNetImpl::zero_emission_heads() {
  zero_param(decoder->projection->head->weight);
  zero_param(decoder->projection->head->bias);
  zero_param(decoder->fusion->convs[2]->weight);
  zero_param(decoder->fusion->convs[2]->bias);
  zero_param(refine->projection->head->weight);
  zero_param(refine->projection->head->bias);
  if (decoder->retrieval) {
    zero_param(decoder->retrieval->back_attn->proj->weight);
    zero_param(decoder->retrieval->back_attn->proj->bias);
  }
}

void ViWSNetImpl::randomize_emission_heads(uint64_t seed, double std) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  std::vector<torch::Tensor> heads{decoder->projection->head->weight, decoder->fusion->convs[2]->weight,
                                   refine->projection->head->weight};
  if (decoder->retrieval) heads.push_back(decoder->retrieval->back_attn->proj->weight);
  for (auto& t : heads) t.normal_(0.0, std, gen);
}

ModelOutput ViWSNetImpl::forward(const torch::Tensor& frames, double lambda, bool with_discriminator) {
  if (frames.dim() != 5) throw ShapeError("model expects frames (B, T, 3, H, W)");
  if (frames.size(1) != config_.clip_length)
    throw ShapeError("model built for T=" + std::to_string(config_.clip_length) + " frames, got " +
                     std::to_string(frames.size(1)));
  ModelOutput out;
  out.encoded = encoder(frames, messengers);
  if (with_discriminator && discriminator) {
    std::vector<torch::Tensor> taps;
    for (auto t : config_.adversarial.taps) taps.push_back(grl(out.encoded.features[t - 1], lambda));
    out.logits = discriminator(taps, out.encoded.batch, out.encoded.frames);
  }
  out.decoded = decoder(out.encoded, frames);
  out.restored = refine(out.decoded.fused);
  return out;
}

}  // namespace viws
