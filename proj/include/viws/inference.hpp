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
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "viws/data.hpp"
#include "viws/model.hpp"

namespace viws {

/// Spatial size multiple every encoder stage (and the refinement net) accepts.
int64_t input_multiple(const EncoderConfig& config);

/// Frame indices of the window centred on `center`, clamped to [0, N-1].
std::vector<int64_t> window_indices(int64_t center, int64_t num_frames, int64_t n);
/// True when the window around `center` needed edge replication.
bool is_padded_window(int64_t center, int64_t num_frames, int64_t n);

/// Restores every frame of a (N, H, W, 3) video with a sliding window of the
/// model's clip length. Edge windows replicate the first/last frame; frames
/// are reflect-padded to `input_multiple` and cropped back. Runs in eval mode
/// without autograd. `chunk` windows go through the model at once.
torch::Tensor restore_video(ViWSNet& model, const torch::Tensor& video, int64_t chunk = 4);

struct FrameMetric {
  std::string video_id;
  int64_t frame_idx = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  WeatherLabel weather = WeatherLabel::rain;
  bool padded = false;
  double input_psnr = 0.0;  // degraded input vs clean; NaN when unknown
};

struct WeatherMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  double input_psnr = 0.0;
  int64_t frames = 0;
};

struct EvaluationSummary {
  std::array<WeatherMetrics, kNumWeathers> per_weather;
  // Mean of the three per-weather means.
  double average_psnr = 0.0;
  double average_ssim = 0.0;
  double average_input_psnr = 0.0;
  std::vector<FrameMetric> frames;

  const WeatherMetrics& operator[](WeatherLabel w) const { return per_weather[static_cast<size_t>(w)]; }
  nlohmann::json to_json() const;
  /// Rain | Haze | Snow | Average table of PSNR/SSIM.
  std::string table() const;
};

/// Per-weather means over frames; throws UserError when a weather has no frames.
EvaluationSummary summarize(std::vector<FrameMetric> frames);

/// Restores every video of `split` and scores it against the clean frames.
/// `max_frames` > 0 keeps only the first frames of each video (cheap validation).
EvaluationSummary evaluate_model(ViWSNet& model, const DatasetManifest& manifest, Split split, int64_t max_frames = 0);

/// Scores <pred_root>/<weather>/<video_id>/frame_%05d.png against the clean
/// frames of the manifest's `split`. Missing predictions raise an IoError
/// listing them.
EvaluationSummary evaluate_directories(const std::filesystem::path& pred_root, const DatasetManifest& manifest,
                                       Split split, int64_t n);

/// video_id,frame_idx,psnr,ssim,weather,padded
void write_metrics_csv(const std::filesystem::path& path, const std::vector<FrameMetric>& frames);

}  // namespace viws
