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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "viws/inference.hpp"
#include "viws/training.hpp"

namespace viws {

struct OverfitResult {
  std::vector<double> smooth_l1;  // per step
  std::vector<double> psnr;       // restored centre frame vs clean, every `eval_every` steps
  int64_t steps = 0;
  int64_t steps_to_target = -1;   // first evaluated step reaching the target, -1 if never
  double input_psnr = 0.0;
  double final_psnr = 0.0;
};

/// Trains on a single clip (frames (T, 3, H, W), target (3, H, W)) and
/// stops once the restored centre frame reaches `target_psnr` or after
/// `max_steps`.
OverfitResult overfit_clip(const ModelConfig& model_config, const TrainConfig& train_config, const torch::Tensor& frames,
                           const torch::Tensor& target, WeatherLabel label, int64_t max_steps, double target_psnr,
                           int64_t eval_every = 50, std::ostream* log = nullptr);

/// Trains from scratch on the manifest's train split for the config's full
/// schedule and evaluates every test video.
EvaluationSummary desk_experiment(const DatasetManifest& manifest, const ModelConfig& model_config,
                                  const TrainConfig& train_config, std::ostream* log = nullptr);

}  // namespace viws
