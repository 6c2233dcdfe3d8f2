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
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "viws/data.hpp"
#include "viws/model.hpp"
#include "viws/objectives.hpp"

namespace viws {

struct TrainConfig {
  int64_t batch_size = 3;
  int64_t clips_per_weather = 1;
  int64_t epochs = 30;
  int64_t steps_per_epoch = 100;
  double lr0 = 5e-4;
  double lr_decay_factor = 0.5;
  int64_t lr_decay_every = 12;  // epochs
  // Linear ramp over the first iterations; Adam's first updates are
  // sign-like and knock zero-initialised emission heads far off identity.
  int64_t warmup_iters = 100;
  int64_t crop = 64;
  int64_t n = 2;
  uint64_t seed = 0;
  bool flip = false;
  LossWeights loss;
  PerceptualConfig perceptual;

  int64_t total_iterations() const { return epochs * steps_per_epoch; }
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  /// Desk-scale defaults (64x64 crops, T=5, batch 3, 3k iterations).
  static TrainConfig desk();
  /// Values from the original recipe: batch 12, 500 epochs, lr 2e-4 halved every 100 epochs, 224 crops.
  static TrainConfig reference();
};

/// lr0 * factor^floor(epoch / every).
double lr_at(int64_t epoch, const TrainConfig& config);
/// lr_at(epoch) scaled by the warmup ramp min(1, (iteration + 1) / warmup_iters).
double lr_for_step(int64_t iteration, const TrainConfig& config);

/// Whole videos of a manifest split held in memory as (N, H, W, 3) float tensors.
class VideoCache {
 public:
  struct Video {
    ManifestEntry entry;
    torch::Tensor clean;
    torch::Tensor degraded;
  };

  VideoCache(const DatasetManifest& manifest, Split split);
  explicit VideoCache(std::vector<Video> videos) : videos_(std::move(videos)) {}

  const std::vector<Video>& videos() const { return videos_; }
  std::vector<const Video*> of_weather(WeatherLabel w) const;

 private:
  std::vector<Video> videos_;
};

struct Batch {
  torch::Tensor frames;   // (B, T, 3, h, w) degraded
  torch::Tensor targets;  // (B, 3, h, w) clean centre frames
  torch::Tensor labels;   // (B,) int64
  std::vector<std::string> video_ids;
  std::vector<int64_t> centers;
};

/// `clips_per_weather` clips of each weather (rain, haze, snow order), random
/// video and centre, one crop window shared by a clip and its clean target.
Batch build_batch(const VideoCache& cache, const TrainConfig& config, std::mt19937_64& rng);

struct StepResult {
  int64_t iteration = 0;  // completed iterations after this step
  int64_t epoch = 0;
  double lr = 0.0;
  double lambda = 0.0;
  double smooth_l1 = 0.0;
  double perceptual = 0.0;
  double adversarial = 0.0;
  double total = 0.0;

  nlohmann::json to_json() const;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Owns the model, the frozen perceptual net, one Adam optimiser over every
/// trainable parameter, the iteration counter and the data RNG.
class Trainer {
 public:
  Trainer(ModelConfig model_config, TrainConfig train_config);

  StepResult step(const Batch& batch);
  Batch next_batch(const VideoCache& cache) { return build_batch(cache, train_config_, rng_); }

  /// Progress p = iteration / total_iterations, clamped to 1.
  double progress() const;
  double current_lambda() const;
  int64_t iteration() const { return iteration_; }
  int64_t epoch() const { return iteration_ / train_config_.steps_per_epoch; }

  ViWSNet& model() { return model_; }
  const ModelConfig& model_config() const { return model_config_; }
  const TrainConfig& train_config() const { return train_config_; }
  torch::optim::Adam& optimizer() { return *optimizer_; }
  PerceptualExtractor& extractor() { return extractor_; }
  std::mt19937_64& rng() { return rng_; }

  /// Every trainable parameter with its module-qualified name.
  std::vector<std::pair<std::string, torch::Tensor>> trainable_parameters() const;

  void save_checkpoint(const std::filesystem::path& path) const;
  std::string serialize() const;
  /// Restores parameters, optimiser moments, counters and RNG; throws
  /// LoadError on corruption, version or model-config mismatch.
  void load_checkpoint(const std::filesystem::path& path);
  void deserialize(const std::string& bytes);

 private:
  ModelConfig model_config_;
  TrainConfig train_config_;
  ViWSNet model_{nullptr};
  PerceptualExtractor extractor_{nullptr};
  std::unique_ptr<torch::optim::Adam> optimizer_;
  int64_t iteration_ = 0;
  std::mt19937_64 rng_;
};

/// Model config stored in a checkpoint, without restoring anything.
ModelConfig read_checkpoint_model_config(const std::filesystem::path& path);

/// Builds a model from a checkpoint's stored config and weights.
ViWSNet load_model(const std::filesystem::path& path);

}  // namespace viws
