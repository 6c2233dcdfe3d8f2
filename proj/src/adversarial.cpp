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

#include "viws/adversarial.hpp"

#include <cmath>
#include <iostream>

#include "viws/data.hpp"
#include "viws/errors.hpp"

namespace viws {

using json = nlohmann::json;

namespace {

class GradientReversal : public torch::autograd::Function<GradientReversal> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& x, double lambda) {
    ctx->saved_data["lambda"] = lambda;
    return x.view_as(x);
  }

  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grads) {
    const double lambda = ctx->saved_data["lambda"].toDouble();
    return {grads[0] * -lambda, torch::Tensor()};
  }
};

}  // namespace

torch::Tensor grl(const torch::Tensor& x, double lambda) { return GradientReversal::apply(x, lambda); }

double lambda_schedule(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    std::cerr << "warning: lambda schedule progress " << p << " outside [0,1], clamping\n";
    p = std::isnan(p) ? 0.0 : std::clamp(p, 0.0, 1.0);
  }
  return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0;
}

void AdversarialConfig::validate(int64_t num_stages) const {
  if (descriptor_dim <= 0 || attention_dim <= 0) throw ConfigError("discriminator widths must be positive");
  if (taps.empty()) throw ConfigError("adv_taps must name at least one stage");
  for (auto t : taps)
    if (t < 1 || t > num_stages) throw ConfigError("adv_taps entry " + std::to_string(t) + " is not an encoder stage");
}

json AdversarialConfig::to_json() const {
  return {{"descriptor_dim", descriptor_dim}, {"attention_dim", attention_dim}, {"adv_taps", taps}};
}

AdversarialConfig AdversarialConfig::from_json(const json& j) {
  AdversarialConfig c;
  try {
    c.descriptor_dim = j.at("descriptor_dim").get<int64_t>();
    c.attention_dim = j.at("attention_dim").get<int64_t>();
    c.taps = j.at("adv_taps").get<std::vector<int64_t>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed adversarial config: ") + e.what());
  }
  return c;
}

FrameDescriptorImpl::FrameDescriptorImpl(int64_t in_channels, int64_t descriptor_dim) {
  proj = register_module("proj", torch::nn::Linear(in_channels, descriptor_dim));
}

torch::Tensor FrameDescriptorImpl::forward(const std::vector<torch::Tensor>& maps, int64_t batch, int64_t frames) {
  std::vector<torch::Tensor> means;
  for (const auto& m : maps) means.push_back(m.mean({2, 3}));
  auto v = proj(torch::cat(means, 1));
  return v.view({batch, frames, v.size(1)});
}

GatedAttentionPoolImpl::GatedAttentionPoolImpl(int64_t descriptor_dim, int64_t attention_dim) {
  w1 = register_module("w1", torch::nn::Linear(torch::nn::LinearOptions(attention_dim, 1).bias(false)));
  w2 = register_module("w2", torch::nn::Linear(torch::nn::LinearOptions(descriptor_dim, attention_dim).bias(false)));
  w3 = register_module("w3", torch::nn::Linear(torch::nn::LinearOptions(descriptor_dim, attention_dim).bias(false)));
}

PoolResult GatedAttentionPoolImpl::forward(const torch::Tensor& v) {
  if (v.dim() != 3 || v.size(1) < 1) throw ShapeError("gated pooling expects (B, T>=1, D_v)");
  auto scores = w1(torch::tanh(w2(v)) * torch::sigmoid(w3(v))).squeeze(-1);  // (B, T)
  // Reduce in score order so the result is bitwise independent of frame order.
  auto order = std::get<1>(scores.sort(/*stable=*/true, 1));
  auto sorted_weights = torch::softmax(scores.gather(1, order), 1);
  auto sorted_v = v.gather(1, order.unsqueeze(-1).expand_as(v));
  auto weights = torch::empty_like(sorted_weights).scatter(1, order, sorted_weights);
  return {(sorted_weights.unsqueeze(-1) * sorted_v).sum(1), weights};
}

WeatherDiscriminatorImpl::WeatherDiscriminatorImpl(int64_t in_channels, const AdversarialConfig& config) {
  descriptor = register_module("descriptor", FrameDescriptor(in_channels, config.descriptor_dim));
  pool = register_module("pool", GatedAttentionPool(config.descriptor_dim, config.attention_dim));
  classifier = register_module("classifier", torch::nn::Linear(config.descriptor_dim, kNumWeathers));
}

torch::Tensor WeatherDiscriminatorImpl::forward(const std::vector<torch::Tensor>& maps, int64_t batch, int64_t frames) {
  return classifier(pool(descriptor(maps, batch, frames)).pooled);
}

torch::Tensor adversarial_loss(const torch::Tensor& logits, const torch::Tensor& labels) {
  if (logits.dim() != 2 || logits.size(1) != kNumWeathers) throw ShapeError("weather logits must be (B, 3)");
  if (labels.min().item<int64_t>() < 0 || labels.max().item<int64_t>() >= kNumWeathers)
    throw RangeError("weather label outside 0..2");
  return torch::nn::functional::cross_entropy(logits, labels);
}

}  // namespace viws
