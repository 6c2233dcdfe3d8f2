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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "viws/data.hpp"

namespace viws {

using Range = std::pair<double, double>;

/// Degradation distribution for one synthetic video.
///
/// `density` is particles (snow) or streaks (rain) per megapixel, and the
/// scattering coefficient beta for haze. Sizes are disk diameters (snow) or
/// streak lengths (rain), in pixels.
struct WeatherSpec {
  WeatherLabel weather = WeatherLabel::snow;
  uint64_t seed = 0;
  double density = 0.0;
  Range size_range{1.0, 1.0};
  Range transparency_range{1.0, 1.0};
  Range blur_sigma_range{0.0, 0.0};
  std::pair<double, double> motion{0.0, 0.0};
  double airlight = 0.8;

  void validate() const;
  nlohmann::json to_json() const;
  static WeatherSpec from_json(const nlohmann::json& j);
};

struct Particle {
  double x = 0.0;  // column, pixel-centre coordinates
  double y = 0.0;  // row
  double size = 1.0;
  double alpha = 1.0;
  double blur_sigma = 0.0;
  int64_t birth_frame = 0;
  double vx = 0.0;
  double vy = 0.0;

  // Position at `frame`, wrapped onto the frame torus.
  std::pair<double, double> position_at(int64_t frame, int64_t height, int64_t width) const;
};

struct ParticleField {
  std::vector<Particle> particles;
};

/// Draws the per-video particle (or streak) population from `spec`.
ParticleField sample_particles(const WeatherSpec& spec, int64_t height, int64_t width);

/// Per-pixel snow alpha map for one frame, shape (H, W) float64.
torch::Tensor render_snow_alpha(const ParticleField& field, int64_t frame, int64_t height, int64_t width);

/// Per-pixel rain streak layer S in [0,1] for one frame, shape (H, W) float64.
torch::Tensor render_rain_layer(const ParticleField& field, const WeatherSpec& spec, int64_t frame,
                                int64_t height, int64_t width);

/// Smooth depth in (0, 1] for haze, shape (H, W) float64.
torch::Tensor haze_depth_map(const WeatherSpec& spec, int64_t frame, int64_t height, int64_t width);

// Pointwise compositing models; images are (..., H, W, 3), maps (H, W).
torch::Tensor snow_composite(const torch::Tensor& clean, const torch::Tensor& alpha);
torch::Tensor haze_composite(const torch::Tensor& clean, const torch::Tensor& depth, double beta, double airlight);
torch::Tensor screen_blend(const torch::Tensor& clean, const torch::Tensor& layer);

// Generators take clean frames (T, H, W, 3) in [0,1] and return degraded
// frames of the same shape; each is a pure function of (clean, spec).
torch::Tensor synth_snow(const torch::Tensor& clean, const WeatherSpec& spec);
torch::Tensor synth_haze(const torch::Tensor& clean, const WeatherSpec& spec);
torch::Tensor synth_rain(const torch::Tensor& clean, const WeatherSpec& spec);
torch::Tensor synthesize(const torch::Tensor& clean, const WeatherSpec& spec);

/// Draws a per-video WeatherSpec from the default distribution for `weather`.
WeatherSpec sample_weather_spec(WeatherLabel weather, uint64_t seed, int64_t height, int64_t width);

/// Procedural clean "driving" video: panning landscape with buildings and texture.
torch::Tensor generate_scene_video(uint64_t seed, int64_t frames, int64_t height, int64_t width);

/// Writes `count` procedural clean videos to <clean_root>/scene_%03d/frame_%05d.png.
void generate_clean_sources(const fs::path& clean_root, int64_t count, int64_t frames, int64_t height,
                            int64_t width, uint64_t seed);

struct BuildOptions {
  fs::path clean_root;
  fs::path out_root;
  std::map<WeatherLabel, int64_t> per_weather_counts;
  double train_fraction = 0.7;
  uint64_t global_seed = 0;
};

struct BuildResult {
  DatasetManifest manifest;
  uint64_t digest = 0;  // hash over every written byte
  bool up_to_date = false;
};

/// Number of training videos out of `count` for a split fraction.
int64_t train_count_for(int64_t count, double train_fraction);

/// Synthesises paired clean/degraded videos under
/// <out_root>/<weather>/<video_id>/{clean,degraded}/ plus weather_spec.json,
/// and writes <out_root>/manifest.json. A rerun whose digest matches the
/// existing manifest leaves files untouched and reports up_to_date.
BuildResult build_dataset(const BuildOptions& options);

}  // namespace viws
