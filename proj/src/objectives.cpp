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

#include "viws/objectives.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "viws/errors.hpp"

namespace viws {

using json = nlohmann::json;
namespace F = torch::nn::functional;

torch::Tensor smooth_l1(const torch::Tensor& pred, const torch::Tensor& gt) {
  if (!pred.sizes().equals(gt.sizes())) throw ShapeError("smooth_l1 shape mismatch");
  return F::smooth_l1_loss(pred, gt, F::SmoothL1LossFuncOptions().reduction(torch::kMean).beta(1.0));
}

json PerceptualConfig::to_json() const {
  json j = {{"channels", channels}, {"seed", seed}, {"linear", linear}};
  j["weights"] = weights ? json(weights->string()) : json(nullptr);
  return j;
}

PerceptualConfig PerceptualConfig::from_json(const json& j) {
  PerceptualConfig c;
  try {
    const auto ch = j.at("channels").get<std::vector<int64_t>>();
    if (ch.size() != 3) throw ConfigError("perceptual channels must list three widths");
    c.channels = {ch[0], ch[1], ch[2]};
    c.seed = j.at("seed").get<uint64_t>();
    c.linear = j.value("linear", false);
    if (j.contains("weights") && !j.at("weights").is_null()) c.weights = j.at("weights").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed perceptual config: ") + e.what());
  }
  return c;
}

PerceptualExtractorImpl::PerceptualExtractorImpl(PerceptualConfig config) : config_(std::move(config)) {
  layers = torch::nn::Sequential();
  auto act = [&]() -> torch::nn::AnyModule {
    if (config_.linear) return torch::nn::AnyModule(torch::nn::Identity());
    return torch::nn::AnyModule(torch::nn::ReLU());
  };
  auto conv = [](int64_t in, int64_t out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
  };
  auto pool = []() { return torch::nn::AvgPool2d(torch::nn::AvgPool2dOptions(2).stride(2)); };
  const auto [c1, c2, c3] = config_.channels;
  // Index-for-index the first 16 layers of VGG16's feature stack.
  layers->push_back(conv(3, c1));    // 0
  layers->push_back(act());          // 1
  layers->push_back(conv(c1, c1));   // 2
  layers->push_back(act());          // 3  tap
  layers->push_back(pool());         // 4
  layers->push_back(conv(c1, c2));   // 5
  layers->push_back(act());          // 6
  layers->push_back(conv(c2, c2));   // 7
  layers->push_back(act());          // 8  tap
  layers->push_back(pool());         // 9
  layers->push_back(conv(c2, c3));   // 10
  layers->push_back(act());          // 11
  layers->push_back(conv(c3, c3));   // 12
  layers->push_back(act());          // 13
  layers->push_back(conv(c3, c3));   // 14
  layers->push_back(act());          // 15 tap
  register_module("layers", layers);

  torch::NoGradGuard no_grad;
  if (config_.weights) {
    torch::serialize::InputArchive archive;
    try {
      archive.load_from(config_.weights->string());
    } catch (const c10::Error& e) {
      throw LoadError("cannot load perceptual weights " + config_.weights->string());
    }
    for (auto& p : named_parameters()) {
      torch::Tensor t;
      if (!archive.try_read(p.key(), t)) throw LoadError("perceptual weights lack " + p.key());
      p.value().copy_(t);
    }
  } else {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(config_.seed);
    for (auto& m : layers->modules(false)) {
      if (auto* c = m->as<torch::nn::Conv2d>()) {
        const double fan_in = static_cast<double>(c->options.in_channels() * 9);
        c->weight.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
        c->bias.zero_();
      }
    }
  }
  for (auto& p : parameters()) p.set_requires_grad(false);
  eval();
}

std::vector<torch::Tensor> PerceptualExtractorImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> taps;
  auto h = x;
  size_t next = 0;
  int64_t i = 0;
  for (auto& layer : *layers) {
    if (next == kTapPoints.size()) break;
    h = layer.forward(h);
    if (i++ == kTapPoints[next]) {
      taps.push_back(h);
      ++next;
    }
  }
  return taps;
}

torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& gt, PerceptualExtractor& extractor) {
  if (!pred.sizes().equals(gt.sizes())) throw ShapeError("perceptual loss shape mismatch");
  const auto fp = extractor(pred);
  const auto fg = extractor(gt);
  auto loss = torch::zeros({}, pred.options());
  for (size_t i = 0; i < fp.size(); ++i) loss = loss + F::mse_loss(fp[i], fg[i]);
  return loss / static_cast<double>(fp.size());
}

LossBreakdown total_loss(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& logits,
                         const torch::Tensor& labels, const LossWeights& weights, PerceptualExtractor& extractor) {
  if (weights.gamma1 < 0.0 || weights.gamma2 < 0.0) throw ConfigError("loss weights must be nonnegative");
  LossBreakdown b;
  b.smooth_l1 = smooth_l1(pred, gt);
  b.perceptual = perceptual_loss(pred, gt, extractor);
  if (logits.defined()) {
    b.adversarial = F::cross_entropy(logits, labels);
  } else {
    b.adversarial = torch::zeros({}, pred.options());
  }
  b.supervised = b.smooth_l1 + weights.gamma1 * b.perceptual;
  b.total = b.supervised + weights.gamma2 * b.adversarial;
  return b;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

torch::Tensor prepare(const torch::Tensor& t) {
  return t.detach().to(torch::kCPU).to(torch::kFloat64).clamp(0.0, 1.0).contiguous();
}

std::vector<double> gaussian_window_1d() {
  constexpr int kSize = 11;
  constexpr double kSigma = 1.5;
  std::vector<double> w(kSize);
  double sum = 0.0;
  for (int i = 0; i < kSize; ++i) {
    const double d = i - kSize / 2;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// 'valid' separable filtering of a (H, W) plane.
std::vector<double> filter_valid(const double* src, int64_t h, int64_t w, const std::vector<double>& k) {
  const auto n = static_cast<int64_t>(k.size());
  const int64_t oh = h - n + 1;
  const int64_t ow = w - n + 1;
  std::vector<double> tmp(static_cast<size_t>(h * ow));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += k[i] * src[y * w + x + i];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(static_cast<size_t>(oh * ow));
  for (int64_t y = 0; y < oh; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

double ssim_plane(const double* a, const double* b, int64_t h, int64_t w) {
  constexpr double C1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double C2 = (0.03 * 1.0) * (0.03 * 1.0);
  const auto k = gaussian_window_1d();
  const auto n = static_cast<size_t>(h * w);
  std::vector<double> aa(n), bb(n), ab(n);
  for (size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w, k);
  const auto mu_b = filter_valid(b, h, w, k);
  const auto s_aa = filter_valid(aa.data(), h, w, k);
  const auto s_bb = filter_valid(bb.data(), h, w, k);
  const auto s_ab = filter_valid(ab.data(), h, w, k);
  double acc = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double va = s_aa[i] - mu_a[i] * mu_a[i];
    const double vb = s_bb[i] - mu_b[i] * mu_b[i];
    const double cov = s_ab[i] - mu_a[i] * mu_b[i];
    acc += ((2.0 * mu_a[i] * mu_b[i] + C1) * (2.0 * cov + C2)) /
           ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + C1) * (va + vb + C2));
  }
  return acc / static_cast<double>(mu_a.size());
}

}  // namespace

double psnr(const torch::Tensor& prediction, const torch::Tensor& ground_truth) {
  if (!prediction.sizes().equals(ground_truth.sizes())) throw ShapeError("psnr shape mismatch");
  auto p = prepare(prediction);
  auto g = prepare(ground_truth);
  const double* pp = p.data_ptr<double>();
  const double* gp = g.data_ptr<double>();
  double se = 0.0;
  for (int64_t i = 0; i < p.numel(); ++i) {
    const double d = pp[i] - gp[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(p.numel());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

double psnr(const FramePair& pair) { return psnr(pair.prediction, pair.ground_truth); }

double ssim(const torch::Tensor& prediction, const torch::Tensor& ground_truth) {
  if (!prediction.sizes().equals(ground_truth.sizes())) throw ShapeError("ssim shape mismatch");
  if (prediction.dim() != 2 && prediction.dim() != 3) throw ShapeError("ssim expects (H, W) or (H, W, C)");
  const int64_t h = prediction.size(0);
  const int64_t w = prediction.size(1);
  if (h < 11 || w < 11) throw ShapeError("frames smaller than the 11x11 SSIM window");
  auto p = prepare(prediction);
  auto g = prepare(ground_truth);
  if (p.dim() == 2) return ssim_plane(p.data_ptr<double>(), g.data_ptr<double>(), h, w);
  const int64_t c = p.size(2);
  double acc = 0.0;
  for (int64_t ch = 0; ch < c; ++ch) {
    auto pc = p.select(2, ch).contiguous();
    auto gc = g.select(2, ch).contiguous();
    acc += ssim_plane(pc.data_ptr<double>(), gc.data_ptr<double>(), h, w);
  }
  return acc / static_cast<double>(c);
}

double ssim(const FramePair& pair) { return ssim(pair.prediction, pair.ground_truth); }

}  // namespace viws
