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

#include "viws/inference.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "viws/errors.hpp"
#include "viws/objectives.hpp"

namespace viws {

int64_t input_multiple(const EncoderConfig& config) {
  int64_t m = 1;
  int64_t stride = config.stem.stride;
  for (int64_t l = 0; l < config.num_stages(); ++l) {
    if (l > 0) stride *= config.merge.stride;
    const auto [r1, r2] = config.reduction_ratios[l];
    m = std::lcm(m, stride * std::max<int64_t>(1, std::lcm(r1, r2)));
  }
  return m;
}

std::vector<int64_t> window_indices(int64_t center, int64_t num_frames, int64_t n) {
  if (center < 0 || center >= num_frames) throw RangeError("window centre out of range");
  std::vector<int64_t> idx;
  for (int64_t k = center - n; k <= center + n; ++k) idx.push_back(std::clamp<int64_t>(k, 0, num_frames - 1));
  return idx;
}

bool is_padded_window(int64_t center, int64_t num_frames, int64_t n) {
  return center - n < 0 || center + n > num_frames - 1;
}

torch::Tensor restore_video(ViWSNet& model, const torch::Tensor& video, int64_t chunk) {
  if (video.dim() != 4 || video.size(3) != 3) throw ShapeError("video must be (N, H, W, 3)");
  const int64_t T = model->config().clip_length;
  const int64_t n = T / 2;
  const int64_t N = video.size(0);
  if (N < T)
    throw RangeError("video has " + std::to_string(N) + " frames; at least " + std::to_string(T) + " are needed");
  torch::NoGradGuard no_grad;
  model->eval();

  const int64_t H = video.size(1), W = video.size(2);
  const int64_t m = input_multiple(model->config().encoder);
  const int64_t pb = (m - H % m) % m, pr = (m - W % m) % m;
  auto x = video.permute({0, 3, 1, 2}).contiguous();  // (N, 3, H, W)
  if (pb || pr) {
    if (pb >= H || pr >= W) throw ShapeError("frame too small to pad to a multiple of " + std::to_string(m));
    x = torch::reflection_pad2d(x, {0, pr, 0, pb});
  }

  std::vector<torch::Tensor> restored;
  for (int64_t start = 0; start < N; start += chunk) {
    std::vector<torch::Tensor> clips;
    for (int64_t t = start; t < std::min(N, start + chunk); ++t)
      clips.push_back(x.index_select(0, torch::tensor(window_indices(t, N, n), torch::kInt64)));
    restored.push_back(model->forward(torch::stack(clips)).restored);
  }
  auto out = torch::cat(restored).narrow(2, 0, H).narrow(3, 0, W);
  return out.permute({0, 2, 3, 1}).contiguous();
}

// ---------------------------------------------------------------------------

nlohmann::json EvaluationSummary::to_json() const {
  auto num = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return nullptr;
    return v;
  };
  nlohmann::json j;
  for (const auto w : kAllWeathers) {
    const auto& m = (*this)[w];
    j[std::string(to_string(w))] = {{"psnr", num(m.psnr)},
                                    {"ssim", num(m.ssim)},
                                    {"input_psnr", num(m.input_psnr)},
                                    {"frames", m.frames}};
  }
  j["average"] = {{"psnr", num(average_psnr)}, {"ssim", num(average_ssim)}, {"input_psnr", num(average_input_psnr)}};
  return j;
}

std::string EvaluationSummary::table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(12) << "" << std::right << std::setw(16) << "Rain" << std::setw(16) << "Haze"
     << std::setw(16) << "Snow" << std::setw(16) << "Average" << "\n";
  auto cell = [&](double p, double s) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << p << "/" << std::setprecision(4) << s;
    os << std::setw(16) << c.str();
  };
  os << std::left << std::setw(12) << "restored" << std::right;
  for (const auto w : kAllWeathers) cell((*this)[w].psnr, (*this)[w].ssim);
  cell(average_psnr, average_ssim);
  os << "\n";
  if (!std::isnan(average_input_psnr)) {
    os << std::left << std::setw(12) << "input PSNR" << std::right;
    for (const auto w : kAllWeathers) os << std::setw(16) << (*this)[w].input_psnr;
    os << std::setw(16) << average_input_psnr << "\n";
  }
  return os.str();
}

EvaluationSummary summarize(std::vector<FrameMetric> frames) {
  EvaluationSummary s;
  for (const auto& f : frames) {
    auto& m = s.per_weather[static_cast<size_t>(f.weather)];
    m.psnr += f.psnr;
    m.ssim += f.ssim;
    m.input_psnr += f.input_psnr;
    ++m.frames;
  }
  for (const auto w : kAllWeathers) {
    auto& m = s.per_weather[static_cast<size_t>(w)];
    if (m.frames == 0) throw UserError("no evaluated frames for weather '" + std::string(to_string(w)) + "'");
    m.psnr /= static_cast<double>(m.frames);
    m.ssim /= static_cast<double>(m.frames);
    m.input_psnr /= static_cast<double>(m.frames);
    s.average_psnr += m.psnr / kNumWeathers;
    s.average_ssim += m.ssim / kNumWeathers;
    s.average_input_psnr += m.input_psnr / kNumWeathers;
  }
  s.frames = std::move(frames);
  return s;
}

namespace {

torch::Tensor load_video(const fs::path& dir, int64_t count) {
  std::vector<torch::Tensor> frames;
  for (int64_t i = 0; i < count; ++i) frames.push_back(load_frame(dir / frame_filename(i)));
  return torch::stack(frames);
}

}  // namespace

EvaluationSummary evaluate_model(ViWSNet& model, const DatasetManifest& manifest, Split split, int64_t max_frames) {
  const int64_t n = model->config().clip_length / 2;
  std::vector<FrameMetric> rows;
  for (const auto& e : manifest.select(split)) {
    // A truncated clip still needs one full window.
    const int64_t keep = std::max(max_frames, model->config().clip_length);
    const int64_t count = max_frames > 0 ? std::min(keep, e.num_frames) : e.num_frames;
    const auto degraded = load_video(manifest.resolve(e.degraded_dir), count);
    const auto clean = load_video(manifest.resolve(e.clean_dir), count);
    const auto restored = restore_video(model, degraded);
    for (int64_t t = 0; t < count; ++t) {
      FrameMetric f;
      f.video_id = e.video_id;
      f.frame_idx = t;
      f.weather = e.weather;
      f.padded = is_padded_window(t, count, n);
      f.psnr = psnr(restored[t], clean[t]);
      f.ssim = ssim(restored[t], clean[t]);
      f.input_psnr = psnr(degraded[t], clean[t]);
      rows.push_back(std::move(f));
    }
  }
  return summarize(std::move(rows));
}

EvaluationSummary evaluate_directories(const fs::path& pred_root, const DatasetManifest& manifest, Split split,
                                       int64_t n) {
  std::vector<FrameMetric> rows;
  std::vector<std::string> missing;
  for (const auto& e : manifest.select(split)) {
    const auto pred_dir = pred_root / std::string(to_string(e.weather)) / e.video_id;
    for (int64_t t = 0; t < e.num_frames; ++t)
      if (!fs::exists(pred_dir / frame_filename(t))) missing.push_back((pred_dir / frame_filename(t)).string());
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " predicted frame(s) missing:";
    for (size_t i = 0; i < missing.size() && i < 20; ++i) msg += "\n  " + missing[i];
    if (missing.size() > 20) msg += "\n  ...";
    throw IoError(msg);
  }
  for (const auto& e : manifest.select(split)) {
    const auto pred_dir = pred_root / std::string(to_string(e.weather)) / e.video_id;
    for (int64_t t = 0; t < e.num_frames; ++t) {
      const auto pred = load_frame(pred_dir / frame_filename(t));
      const auto gt = load_frame(manifest.resolve(e.clean_dir) / frame_filename(t));
      const auto deg = load_frame(manifest.resolve(e.degraded_dir) / frame_filename(t));
      if (!pred.sizes().equals(gt.sizes()))
        throw ShapeError("prediction " + (pred_dir / frame_filename(t)).string() + " does not match the clean frame size");
      FrameMetric f;
      f.video_id = e.video_id;
      f.frame_idx = t;
      f.weather = e.weather;
      f.padded = is_padded_window(t, e.num_frames, n);
      f.psnr = psnr(pred, gt);
      f.ssim = ssim(pred, gt);
      f.input_psnr = psnr(deg, gt);
      rows.push_back(std::move(f));
    }
  }
  return summarize(std::move(rows));
}

void write_metrics_csv(const fs::path& path, const std::vector<FrameMetric>& frames) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "video_id,frame_idx,psnr,ssim,weather,padded\n";
  out << std::setprecision(10);
  for (const auto& f : frames) {
    out << f.video_id << ',' << f.frame_idx << ',';
    if (std::isinf(f.psnr))
      out << "inf";
    else
      out << f.psnr;
    out << ',' << f.ssim << ',' << to_string(f.weather) << ',' << (f.padded ? 1 : 0) << '\n';
  }
}

}  // namespace viws
