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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "viws/errors.hpp"

namespace viws {

namespace fs = std::filesystem;

enum class WeatherLabel : int { rain = 0, haze = 1, snow = 2 };

inline constexpr int kNumWeathers = 3;
inline constexpr std::array<WeatherLabel, kNumWeathers> kAllWeathers = {
    WeatherLabel::rain, WeatherLabel::haze, WeatherLabel::snow};

std::string_view to_string(WeatherLabel w);
WeatherLabel parse_weather(std::string_view name);

enum class Split { train, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

/// T = 2n+1 consecutive frames centred on `target_index`.
struct VideoClip {
  torch::Tensor frames;  // (T, H, W, 3) float32 in [0, 1]
  WeatherLabel weather = WeatherLabel::rain;
  int64_t target_index = 0;
  std::string video_id;
  std::vector<int64_t> frame_indices;
  // Reflect padding added at load to reach a multiple of 32.
  int64_t pad_bottom = 0;
  int64_t pad_right = 0;

  int64_t length() const { return frames.size(0); }
  int64_t height() const { return frames.size(1); }
  int64_t width() const { return frames.size(2); }
  torch::Tensor target_frame() const { return frames[target_index]; }
};

struct ManifestEntry {
  std::string video_id;
  WeatherLabel weather = WeatherLabel::rain;
  fs::path clean_dir;     // relative to the manifest root
  fs::path degraded_dir;  // relative to the manifest root
  int64_t num_frames = 0;
  Split split = Split::train;
};

class DatasetManifest {
 public:
  DatasetManifest() = default;
  DatasetManifest(fs::path root, std::vector<ManifestEntry> entries);

  static DatasetManifest load(const fs::path& path);
  void save(const fs::path& path) const;

  // Checks unique ids and disjoint splits; with `check_files` also verifies
  // every listed directory holds exactly num_frames frames.
  void validate(bool check_files = true) const;

  const fs::path& root() const { return root_; }
  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::vector<ManifestEntry> select(Split split) const;
  std::vector<ManifestEntry> select(Split split, WeatherLabel weather) const;
  fs::path resolve(const fs::path& rel) const { return root_ / rel; }

  std::string to_json_string() const;

 private:
  fs::path root_;
  std::vector<ManifestEntry> entries_;
};

/// Frame filename for a zero-based index: frame_00000.png.
std::string frame_filename(int64_t index);

/// Sorted frame files of a directory (frame_%05d.png convention).
std::vector<fs::path> list_frames(const fs::path& dir);

/// Reads an 8-bit RGB PNG into a (H, W, 3) float tensor in [0, 1].
torch::Tensor load_frame(const fs::path& path);

/// Clamps to [0,1], quantises by round(255 x) and writes an 8-bit RGB PNG.
void save_frame(const fs::path& path, const torch::Tensor& frame);

/// Quantisation used by save_frame, exposed for exact round-trip checks.
torch::Tensor quantize_frame(const torch::Tensor& frame);

/// Loads frames center-n .. center+n from the entry's clean or degraded dir.
VideoClip load_clip(const DatasetManifest& manifest, const ManifestEntry& entry,
                    int64_t center, int64_t n, bool degraded);

/// Loads an explicit list of frames (used by inference on bare directories).
VideoClip clip_from_frames(torch::Tensor frames, WeatherLabel weather,
                           std::vector<int64_t> indices, std::string video_id);

/// Reflect-pads H and W up to a multiple of `multiple`, recording the padding.
VideoClip pad_to_multiple(VideoClip clip, int64_t multiple = 32);

struct CropWindow {
  int64_t top = 0;
  int64_t left = 0;
  int64_t size = 0;
  bool flip = false;
};

CropWindow draw_crop(int64_t height, int64_t width, int64_t size,
                     uint64_t seed, bool allow_flip = false);
VideoClip apply_crop(const VideoClip& clip, const CropWindow& window);

/// Same spatial window (and flip decision) for every frame.
VideoClip crop_and_augment(const VideoClip& clip, int64_t size, uint64_t seed,
                           bool allow_flip = false);

/// Crops a degraded/clean pair with one shared window.
std::pair<VideoClip, VideoClip> crop_and_augment(const VideoClip& degraded,
                                                 const VideoClip& clean,
                                                 int64_t size, uint64_t seed,
                                                 bool allow_flip = false);

struct FramePair {
  torch::Tensor prediction;    // (H, W, 3)
  torch::Tensor ground_truth;  // (H, W, 3)
};

}  // namespace viws
