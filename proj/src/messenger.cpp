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

#include "viws/messenger.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "viws/errors.hpp"

namespace viws {

using json = nlohmann::json;

ShiftPlan ShiftPlan::default_plan() {
  ShiftPlan p;
  p.groups = {GroupShift{ShiftDirection::none, 0},    GroupShift{ShiftDirection::forward, 1},
              GroupShift{ShiftDirection::backward, 1}, GroupShift{ShiftDirection::none, 0},
              GroupShift{ShiftDirection::forward, 2},  GroupShift{ShiftDirection::backward, 2}};
  return p;
}

ShiftPlan ShiftPlan::identity() { return ShiftPlan{}; }

ShiftPlan ShiftPlan::inverse() const {
  ShiftPlan out = *this;
  for (auto& g : out.groups) {
    if (g.direction == ShiftDirection::forward)
      g.direction = ShiftDirection::backward;
    else if (g.direction == ShiftDirection::backward)
      g.direction = ShiftDirection::forward;
  }
  return out;
}

bool ShiftPlan::is_identity() const {
  for (const auto& g : groups)
    if (g.direction != ShiftDirection::none && g.step != 0) return false;
  return true;
}

json ShiftPlan::to_json() const {
  json arr = json::array();
  for (const auto& g : groups) {
    const char* d = g.direction == ShiftDirection::forward    ? "forward"
                    : g.direction == ShiftDirection::backward ? "backward"
                                                              : "none";
    arr.push_back({{"direction", d}, {"step", g.step}});
  }
  return arr;
}

ShiftPlan ShiftPlan::from_json(const json& j) {
  if (!j.is_array() || j.size() != kMessengerGroups) throw ConfigError("shift_plan must list exactly 6 groups");
  ShiftPlan p;
  for (size_t i = 0; i < kMessengerGroups; ++i) {
    const auto d = j[i].at("direction").get<std::string>();
    if (d == "none")
      p.groups[i].direction = ShiftDirection::none;
    else if (d == "forward")
      p.groups[i].direction = ShiftDirection::forward;
    else if (d == "backward")
      p.groups[i].direction = ShiftDirection::backward;
    else
      throw ConfigError("unknown shift direction '" + d + "'");
    p.groups[i].step = j[i].at("step").get<int64_t>();
    if (p.groups[i].step < 0 || p.groups[i].step > 2) throw ConfigError("shift step must lie in 0..2");
  }
  return p;
}

void trunc_normal_(torch::Tensor t, double std, torch::Generator* gen) {
  torch::NoGradGuard no_grad;
  auto g = gen ? std::optional<at::Generator>(*gen) : std::nullopt;
  auto tmp = torch::empty(t.sizes(), t.options().dtype(torch::kFloat64));
  tmp.normal_(0.0, 1.0, g);
  // Resample out-of-range entries until none remain.
  for (int iter = 0; iter < 64; ++iter) {
    auto bad = tmp.abs() > 2.0;
    if (!bad.any().item<bool>()) break;
    auto fresh = torch::empty_like(tmp).normal_(0.0, 1.0, g);
    tmp = torch::where(bad, fresh, tmp);
  }
  tmp.clamp_(-2.0, 2.0);
  t.copy_(tmp * std);
}

MessengerTokens init_messengers(int64_t num_tokens, int64_t channels, int64_t frames, uint64_t seed) {
  if (num_tokens <= 0 || num_tokens % kMessengerGroups != 0)
    throw ConfigError("messenger count M=" + std::to_string(num_tokens) + " must be a positive multiple of 6");
  if (channels <= 0 || frames <= 0) throw ConfigError("messenger channels and frames must be positive");
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  auto block = torch::empty({num_tokens, channels}, torch::kFloat32);
  trunc_normal_(block, 0.02, &gen);
  MessengerTokens m;
  m.tokens = block.unsqueeze(0).repeat({frames, 1, 1}).contiguous();
  return m;
}

namespace {

// Shift along time dim (-3) by `offset` frames; positive moves frame k to k+offset.
torch::Tensor shift_time(const torch::Tensor& x, int64_t offset) {
  const int64_t dim = x.dim() - 3;
  const int64_t T = x.size(dim);
  if (offset == 0) return x;
  const int64_t s = std::min<int64_t>(std::abs(offset), std::max<int64_t>(T - 1, 0));
  if (s == 0) return x;
  auto zeros = torch::zeros_like(x.narrow(dim, 0, s));
  if (offset > 0) return torch::cat({zeros, x.narrow(dim, 0, T - s)}, dim);
  return torch::cat({x.narrow(dim, s, T - s), zeros}, dim);
}

torch::Tensor apply_plan(const torch::Tensor& tokens, const ShiftPlan& plan) {
  if (tokens.dim() < 3) throw ShapeError("messenger tokens must be (..., T, M, C)");
  const int64_t M = tokens.size(-2);
  if (M % kMessengerGroups != 0) throw ShapeError("messenger count must be divisible by 6");
  if (plan.is_identity()) return tokens;
  const int64_t gsize = M / kMessengerGroups;
  std::vector<torch::Tensor> parts;
  parts.reserve(kMessengerGroups);
  for (int g = 0; g < kMessengerGroups; ++g) {
    auto part = tokens.narrow(-2, g * gsize, gsize);
    const auto& gs = plan.groups[g];
    const int64_t off = gs.direction == ShiftDirection::forward    ? gs.step
                        : gs.direction == ShiftDirection::backward ? -gs.step
                                                                   : 0;
    parts.push_back(shift_time(part, off));
  }
  return torch::cat(parts, -2);
}

}  // namespace

torch::Tensor temporal_shift(const torch::Tensor& tokens, const ShiftPlan& plan) { return apply_plan(tokens, plan); }

torch::Tensor temporal_shiftback(const torch::Tensor& tokens, const ShiftPlan& plan) {
  return apply_plan(tokens, plan.inverse());
}

MessengerTokens temporal_shift(const MessengerTokens& m) { return {temporal_shift(m.tokens, m.plan), m.plan}; }

MessengerTokens temporal_shiftback(const MessengerTokens& m) { return {temporal_shiftback(m.tokens, m.plan), m.plan}; }

}  // namespace viws
