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

#include <array>
#include <cstdint>

#include <json.hpp>

namespace viws {

inline constexpr int kMessengerGroups = 6;

enum class ShiftDirection { none, forward, backward };

struct GroupShift {
  ShiftDirection direction = ShiftDirection::none;
  int64_t step = 0;
  bool operator==(const GroupShift&) const = default;
};

/// Per-group temporal shift schedule for messenger tokens.
///
/// The default plan gives the first three groups short-term context
/// (0, +1, -1 frames) and the last three long-term context (0, +2, -2).
struct ShiftPlan {
  std::array<GroupShift, kMessengerGroups> groups{};

  static ShiftPlan default_plan();
  static ShiftPlan identity();
  ShiftPlan inverse() const;
  bool is_identity() const;

  nlohmann::json to_json() const;
  static ShiftPlan from_json(const nlohmann::json& j);
  bool operator==(const ShiftPlan&) const = default;
};

/// Messenger tokens of one clip (or batch), time on dim -3, tokens on dim -2.
struct MessengerTokens {
  torch::Tensor tokens;  // (..., T, M, C)
  ShiftPlan plan = ShiftPlan::default_plan();

  int64_t frames() const { return tokens.size(-3); }
  int64_t count() const { return tokens.size(-2); }
  int64_t group_size() const { return count() / kMessengerGroups; }
  // Token index range [begin, end) of group g.
  std::pair<int64_t, int64_t> group_range(int g) const { return {g * group_size(), (g + 1) * group_size()}; }
};

/// Truncated-normal (std 0.02) init of an (M, C) block, copied to each of T
/// frames. Throws ConfigError unless M is a positive multiple of 6.
MessengerTokens init_messengers(int64_t num_tokens, int64_t channels, int64_t frames, uint64_t seed);

/// Moves each group's tokens `step` frames along time; vacated slots are zero.
/// Steps larger than T-1 clamp to T-1.
torch::Tensor temporal_shift(const torch::Tensor& tokens, const ShiftPlan& plan);
MessengerTokens temporal_shift(const MessengerTokens& m);

/// Inverse permutation of temporal_shift (opposite direction, same step).
torch::Tensor temporal_shiftback(const torch::Tensor& tokens, const ShiftPlan& plan);
MessengerTokens temporal_shiftback(const MessengerTokens& m);

/// Fills `t` in place with a truncated normal in [-2 std, 2 std].
void trunc_normal_(torch::Tensor t, double std, torch::Generator* gen = nullptr);

}  // namespace viws
