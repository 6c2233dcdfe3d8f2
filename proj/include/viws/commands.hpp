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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "viws/inference.hpp"
#include "viws/model.hpp"
#include "viws/synthesis.hpp"
#include "viws/training.hpp"

namespace viws {

/// Environment variable that replaces `output_root` of any run config.
inline constexpr const char* kOutputRootEnv = "VIWS_OUTPUT_ROOT";

struct SynthesizeSection {
  fs::path clean_root;  // empty: <output_root>/sources
  // When > 0, procedural clean sources are generated into clean_root first.
  int64_t generate_count = 0;
  int64_t generate_frames = 12;
  int64_t generate_height = 64;
  int64_t generate_width = 64;
  std::map<WeatherLabel, int64_t> per_weather{{WeatherLabel::rain, 3}, {WeatherLabel::haze, 3}, {WeatherLabel::snow, 3}};
  double train_fraction = 0.7;
};

struct TrainSection {
  TrainConfig config;
  int64_t validate_every = 500;   // iterations; 0 disables periodic validation
  int64_t validation_frames = 0;  // 0: all frames of each test video
  int64_t checkpoint_every = 500;
};

struct InferSection {
  fs::path input;   // frame directory; empty: every test video of the manifest
  fs::path output;  // empty: <output_root>/predictions
  int64_t chunk = 4;
};

struct EvaluateSection {
  fs::path predictions;  // empty: <output_root>/predictions
  Split split = Split::test;
};

/// Whole-experiment configuration. Relative paths resolve against the
/// directory of the config file; outputs live under `output_root`.
struct RunConfig {
  fs::path output_root = "viws_out";
  fs::path manifest;  // empty: <output_root>/dataset/manifest.json
  uint64_t seed = 0;
  std::string model_preset = "desk";
  std::string model_variant = "full";
  ModelConfig model;
  SynthesizeSection synthesize;
  TrainSection train;
  InferSection infer;
  EvaluateSection evaluate;

  fs::path dataset_root() const { return output_root / "dataset"; }
  fs::path manifest_path() const { return manifest.empty() ? dataset_root() / "manifest.json" : manifest; }
  fs::path train_dir() const { return output_root / "train"; }
  fs::path predictions_dir() const { return infer.output.empty() ? output_root / "predictions" : infer.output; }

  /// Fully resolved configuration (every default filled in); loading it back
  /// yields the same RunConfig.
  nlohmann::json to_json() const;
  /// Unknown keys at any level raise ConfigError.
  static RunConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {});
  /// Reads a config file and applies the output-root environment override.
  static RunConfig load(const fs::path& path);
};

/// Writes the resolved config to <dir>/resolved_config.<command>.json.
void write_resolved_config(const RunConfig& config, const fs::path& dir, const std::string& command);

BuildResult cmd_synthesize(const RunConfig& config, std::ostream& out);

struct TrainOptions {
  bool resume = false;
  std::optional<fs::path> checkpoint;  // resume source; default <train_dir>/last.ckpt
  int64_t max_steps = 0;               // stop early after this many steps (0: run to the end)
};

/// Trains to completion (or max_steps), writing last.ckpt, best.ckpt,
/// train_log.jsonl and validation.jsonl under the train directory.
/// Returns the final iteration.
int64_t cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out);

/// Restores frames with the given (or best) checkpoint; returns the output directory.
fs::path cmd_infer(const RunConfig& config, const std::optional<fs::path>& checkpoint, std::ostream& out);

EvaluationSummary cmd_evaluate(const RunConfig& config, std::ostream& out);

/// Synthesis summary table: video counts per weather and split.
std::string manifest_table(const DatasetManifest& manifest);

}  // namespace viws
