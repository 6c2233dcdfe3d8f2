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

#include "viws/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace viws {

using json = nlohmann::json;

std::string_view to_string(WeatherLabel w) {
  switch (w) {
    case WeatherLabel::rain: return "rain";
    case WeatherLabel::haze: return "haze";
    case WeatherLabel::snow: return "snow";
  }
  throw ConfigError("invalid weather label");
}

WeatherLabel parse_weather(std::string_view name) {
  if (name == "rain") return WeatherLabel::rain;
  if (name == "haze") return WeatherLabel::haze;
  if (name == "snow") return WeatherLabel::snow;
  throw ConfigError("unknown weather type '" + std::string(name) + "'");
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// PNG I/O

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

torch::Tensor load_frame(const fs::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open frame: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt png: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const auto width = static_cast<int64_t>(png_get_image_width(png, info));
  const auto height = static_cast<int64_t>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  auto bytes = torch::empty({height, width, 3}, torch::kUInt8);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int64_t y = 0; y < height; ++y) rows[y] = bytes.data_ptr<uint8_t>() + y * width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  return bytes.to(torch::kFloat32).div_(255.0f);
}

torch::Tensor quantize_frame(const torch::Tensor& frame) {
  auto src = frame.to(torch::kFloat64).contiguous();
  auto out = torch::empty(src.sizes(), torch::kUInt8);
  const double* in = src.data_ptr<double>();
  uint8_t* dst = out.data_ptr<uint8_t>();
  for (int64_t i = 0; i < src.numel(); ++i) {
    if (!std::isfinite(in[i])) throw RangeError("non-finite pixel value in frame");
    const double v = std::clamp(in[i], 0.0, 1.0);
    dst[i] = static_cast<uint8_t>(std::lround(255.0 * v));
  }
  return out;
}

void save_frame(const fs::path& path, const torch::Tensor& frame) {
  if (frame.dim() != 3 || frame.size(2) != 3)
    throw ShapeError("save_frame expects (H, W, 3), got " + std::to_string(frame.dim()) + "-d tensor");
  auto bytes = quantize_frame(frame);
  const auto height = bytes.size(0);
  const auto width = bytes.size(1);

  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write frame: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int64_t y = 0; y < height; ++y) rows[y] = bytes.data_ptr<uint8_t>() + y * width * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string frame_filename(int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05lld.png", static_cast<long long>(index));
  return buf;
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("frame_", 0) == 0 && e.path().extension() == ".png")
      out.push_back(e.path());
  }
  // Zero-padded names sort numerically.
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest::DatasetManifest(fs::path root, std::vector<ManifestEntry> entries)
    : root_(std::move(root)), entries_(std::move(entries)) {}

std::string DatasetManifest::to_json_string() const {
  json arr = json::array();
  for (const auto& e : entries_) {
    arr.push_back({{"video_id", e.video_id},
                   {"weather", std::string(to_string(e.weather))},
                   {"clean_dir", e.clean_dir.generic_string()},
                   {"degraded_dir", e.degraded_dir.generic_string()},
                   {"num_frames", e.num_frames},
                   {"split", std::string(to_string(e.split))}});
  }
  json doc = {{"format", "viws-manifest"}, {"version", 1}, {"entries", arr}};
  return doc.dump(2) + "\n";
}

void DatasetManifest::save(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << to_json_string();
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest " + path.string() + ": " + e.what());
  }
  std::vector<ManifestEntry> entries;
  try {
    for (const auto& j : doc.at("entries")) {
      ManifestEntry e;
      e.video_id = j.at("video_id").get<std::string>();
      e.weather = parse_weather(j.at("weather").get<std::string>());
      e.clean_dir = j.at("clean_dir").get<std::string>();
      e.degraded_dir = j.at("degraded_dir").get<std::string>();
      e.num_frames = j.at("num_frames").get<int64_t>();
      e.split = parse_split(j.at("split").get<std::string>());
      entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m(path.parent_path(), std::move(entries));
  m.validate(false);
  return m;
}

void DatasetManifest::validate(bool check_files) const {
  std::set<std::string> ids;
  for (const auto& e : entries_) {
    if (!ids.insert(e.video_id).second) throw ConfigError("duplicate video_id in manifest: " + e.video_id);
    if (e.num_frames <= 0) throw ConfigError("video " + e.video_id + " has no frames");
    if (!check_files) continue;
    for (const auto& dir : {e.clean_dir, e.degraded_dir}) {
      const auto frames = list_frames(resolve(dir));
      if (static_cast<int64_t>(frames.size()) != e.num_frames)
        throw ConfigError("directory " + resolve(dir).string() + " holds " + std::to_string(frames.size()) +
                          " frames, manifest lists " + std::to_string(e.num_frames));
      for (int64_t i = 0; i < e.num_frames; ++i)
        if (frames[i].filename() != frame_filename(i))
          throw ConfigError("unexpected frame name " + frames[i].string());
    }
  }
}

std::vector<ManifestEntry> DatasetManifest::select(Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries_)
    if (e.split == split) out.push_back(e);
  return out;
}

std::vector<ManifestEntry> DatasetManifest::select(Split split, WeatherLabel weather) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries_)
    if (e.split == split && e.weather == weather) out.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// Clips

VideoClip clip_from_frames(torch::Tensor frames, WeatherLabel weather, std::vector<int64_t> indices,
                           std::string video_id) {
  if (frames.dim() != 4 || frames.size(3) != 3) throw ShapeError("clip frames must be (T, H, W, 3)");
  if (frames.size(0) % 2 != 1) throw ShapeError("clip length must be odd (T = 2n+1)");
  VideoClip clip;
  clip.target_index = frames.size(0) / 2;
  clip.frames = std::move(frames);
  clip.weather = weather;
  clip.frame_indices = std::move(indices);
  clip.video_id = std::move(video_id);
  return clip;
}

VideoClip pad_to_multiple(VideoClip clip, int64_t multiple) {
  const int64_t h = clip.height();
  const int64_t w = clip.width();
  const int64_t pb = (multiple - h % multiple) % multiple;
  const int64_t pr = (multiple - w % multiple) % multiple;
  if (pb == 0 && pr == 0) return clip;
  if (pb >= h || pr >= w) throw ShapeError("frame too small to reflect-pad to a multiple of " + std::to_string(multiple));
  // reflection_pad2d wants (N, C, H, W)
  auto x = clip.frames.permute({0, 3, 1, 2});
  x = torch::reflection_pad2d(x, {0, pr, 0, pb});
  clip.frames = x.permute({0, 2, 3, 1}).contiguous();
  clip.pad_bottom += pb;
  clip.pad_right += pr;
  return clip;
}

VideoClip load_clip(const DatasetManifest& manifest, const ManifestEntry& entry, int64_t center, int64_t n,
                    bool degraded) {
  if (n < 0) throw RangeError("clip half-length n must be >= 0");
  if (center - n < 0 || center + n >= entry.num_frames)
    throw RangeError("center " + std::to_string(center) + " with n=" + std::to_string(n) +
                     " out of range for video " + entry.video_id + " (" + std::to_string(entry.num_frames) +
                     " frames)");
  const fs::path dir = manifest.resolve(degraded ? entry.degraded_dir : entry.clean_dir);
  std::vector<torch::Tensor> frames;
  std::vector<int64_t> indices;
  for (int64_t k = center - n; k <= center + n; ++k) {
    const fs::path p = dir / frame_filename(k);
    if (!fs::exists(p)) throw IoError("missing frame file: " + p.string());
    frames.push_back(load_frame(p));
    indices.push_back(k);
  }
  auto clip = clip_from_frames(torch::stack(frames), entry.weather, std::move(indices), entry.video_id);
  return pad_to_multiple(std::move(clip), 32);
}

CropWindow draw_crop(int64_t height, int64_t width, int64_t size, uint64_t seed, bool allow_flip) {
  if (size <= 0 || size > std::min(height, width))
    throw RangeError("crop size " + std::to_string(size) + " exceeds frame " + std::to_string(height) + "x" +
                     std::to_string(width));
  if (size % 32 != 0) throw RangeError("crop size must be divisible by 32");
  std::mt19937_64 rng(seed);
  CropWindow w;
  w.size = size;
  w.top = std::uniform_int_distribution<int64_t>(0, height - size)(rng);
  w.left = std::uniform_int_distribution<int64_t>(0, width - size)(rng);
  w.flip = allow_flip && std::bernoulli_distribution(0.5)(rng);
  return w;
}

VideoClip apply_crop(const VideoClip& clip, const CropWindow& window) {
  VideoClip out = clip;
  auto f = clip.frames.slice(1, window.top, window.top + window.size).slice(2, window.left, window.left + window.size);
  if (window.flip) f = f.flip({2});
  out.frames = f.contiguous();
  out.pad_bottom = 0;
  out.pad_right = 0;
  return out;
}

VideoClip crop_and_augment(const VideoClip& clip, int64_t size, uint64_t seed, bool allow_flip) {
  return apply_crop(clip, draw_crop(clip.height(), clip.width(), size, seed, allow_flip));
}

std::pair<VideoClip, VideoClip> crop_and_augment(const VideoClip& degraded, const VideoClip& clean, int64_t size,
                                                 uint64_t seed, bool allow_flip) {
  if (!degraded.frames.sizes().equals(clean.frames.sizes()))
    throw ShapeError("degraded/clean clips differ in shape");
  const auto w = draw_crop(degraded.height(), degraded.width(), size, seed, allow_flip);
  return {apply_crop(degraded, w), apply_crop(clean, w)};
}

}  // namespace viws
