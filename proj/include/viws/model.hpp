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
#include <string>

#include <json.hpp>

#include "viws/adversarial.hpp"
#include "viws/decoder.hpp"
#include "viws/encoder.hpp"

namespace viws {

struct ModelConfig {
  EncoderConfig encoder = EncoderConfig::desk();
  DecoderConfig decoder;
  AdversarialConfig adversarial;
  int64_t clip_length = 5;       // T = 2n+1
  bool use_messengers = true;    // messenger tokens + temporal shifts
  bool use_retrieval = true;     // messenger-driven transformer decoder
  bool use_adversarial = true;   // discriminator behind a GRL
  uint64_t init_seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  /// Stable hash of the architecture fields (checkpoint compatibility).
  uint64_t hash() const;

  static ModelConfig desk();
  static ModelConfig full();
  static ModelConfig toy();
  static ModelConfig preset(const std::string& name);

  /// Ablation variants: "full", "no_messenger" (no messengers, no retrieval,
  /// no adversary), "no_adversarial" (full minus the discriminator).
  ModelConfig with_variant(const std::string& variant) const;
};

struct ModelOutput {
  torch::Tensor restored;  // (B, 3, H, W) in [0, 1]
  torch::Tensor logits;    // (B, 3); undefined unless the discriminator ran
  EncoderOutput encoded;
  DecoderOutput decoded;
};

class ViWSNetImpl : public torch::nn::Module {
 public:
  explicit ViWSNetImpl(ModelConfig config);

  /// frames: (B, T, 3, H, W) in [0, 1]. The discriminator runs (through the
  /// GRL with `lambda`) only when `with_discriminator` is set.
  ModelOutput forward(const torch::Tensor& frames, double lambda = 0.0, bool with_discriminator = false);

  const ModelConfig& config() const { return config_; }

  /// Zeroes every emission head (decoder residual head, retrieval output,
  /// temporal-fusion last conv, refinement head); the network is then the
  /// identity on the centre frame.
  void zero_emission_heads();
  /// Random small emission heads, used by gradient checks.
  void randomize_emission_heads(uint64_t seed, double std = 0.05);

  torch::Tensor messengers;  // (T, M, C_1) parameter; undefined without messengers
  Encoder encoder{nullptr};
  Decoder decoder{nullptr};
  RefineNet refine{nullptr};
  WeatherDiscriminator discriminator{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(ViWSNet);

/// Trunc-normal(0.02) linears, Kaiming fan-in convs (residual conv pairs
/// scaled by 0.1 on their second conv), unit LayerNorms.
void init_weights(torch::nn::Module& module, uint64_t seed);
void init_weights(torch::nn::Module& module);

int64_t count_parameters(const torch::nn::Module& module);

}  // namespace viws
