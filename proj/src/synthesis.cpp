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

#include "viws/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "viws/util.hpp"

namespace viws {

using json = nlohmann::json;

namespace {

void check_range(const Range& r, const char* name, bool unit) {
  if (!std::isfinite(r.first) || !std::isfinite(r.second)) throw ConfigError(std::string(name) + " not finite");
  if (r.first > r.second) throw ConfigError(std::string(name) + " range is not ordered (low > high)");
  if (r.first < 0.0) throw ConfigError(std::string(name) + " must be nonnegative");
  if (unit && r.second > 1.0) throw ConfigError(std::string(name) + " must lie in [0,1]");
}

double uniform(std::mt19937_64& rng, const Range& r) {
  if (r.first == r.second) return r.first;
  return std::uniform_real_distribution<double>(r.first, r.second)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return uniform(rng, Range{lo, hi}); }

double wrap(double v, double period) {
  double m = std::fmod(v, period);
  return m < 0 ? m + period : m;
}

int64_t wrap_index(int64_t v, int64_t period) {
  int64_t m = v % period;
  return m < 0 ? m + period : m;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable blur of a square patch with zero padding.
void blur_patch(std::vector<double>& patch, int side, double sigma) {
  if (sigma < 1e-6) return;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(patch.size(), 0.0);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < side) acc += k[i + r] * patch[y * side + xx];
      }
      tmp[y * side + x] = acc;
    }
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < side) acc += k[i + r] * tmp[yy * side + x];
      }
      patch[y * side + x] = acc;
    }
}

// Screen-accumulates a local patch into a wrapped (H, W) map: A = 1-(1-A)(1-a).
void accumulate(double* map, int64_t height, int64_t width, const std::vector<double>& patch, int side,
                int64_t top, int64_t left) {
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double a = patch[y * side + x];
      if (a <= 0.0) continue;
      double& dst = map[wrap_index(top + y, height) * width + wrap_index(left + x, width)];
      dst = 1.0 - (1.0 - dst) * (1.0 - std::min(a, 1.0));
    }
}

void check_frames(const torch::Tensor& clean) {
  if (clean.dim() != 4 || clean.size(3) != 3) throw ShapeError("weather synthesis expects frames (T, H, W, 3)");
}

torch::Tensor map_to_image(const torch::Tensor& map) { return map.unsqueeze(-1); }

}  // namespace

// ---------------------------------------------------------------------------
// WeatherSpec

void WeatherSpec::validate() const {
  if (!std::isfinite(density) || density < 0.0) throw ConfigError("density must be finite and nonnegative");
  check_range(size_range, "size", false);
  check_range(transparency_range, "transparency", true);
  check_range(blur_sigma_range, "blur_sigma", false);
  if (!std::isfinite(motion.first) || !std::isfinite(motion.second)) throw ConfigError("motion not finite");
  if (!(airlight >= 0.0 && airlight <= 1.0)) throw ConfigError("airlight must lie in [0,1]");
}

json WeatherSpec::to_json() const {
  return {{"weather", std::string(to_string(weather))},
          {"seed", seed},
          {"density", density},
          {"size_range", {size_range.first, size_range.second}},
          {"transparency_range", {transparency_range.first, transparency_range.second}},
          {"blur_sigma_range", {blur_sigma_range.first, blur_sigma_range.second}},
          {"motion", {motion.first, motion.second}},
          {"airlight", airlight}};
}

WeatherSpec WeatherSpec::from_json(const json& j) {
  WeatherSpec s;
  try {
    s.weather = parse_weather(j.at("weather").get<std::string>());
    s.seed = j.at("seed").get<uint64_t>();
    s.density = j.at("density").get<double>();
    s.size_range = {j.at("size_range").at(0).get<double>(), j.at("size_range").at(1).get<double>()};
    s.transparency_range = {j.at("transparency_range").at(0).get<double>(),
                            j.at("transparency_range").at(1).get<double>()};
    s.blur_sigma_range = {j.at("blur_sigma_range").at(0).get<double>(), j.at("blur_sigma_range").at(1).get<double>()};
    s.motion = {j.at("motion").at(0).get<double>(), j.at("motion").at(1).get<double>()};
    s.airlight = j.at("airlight").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed weather spec: ") + e.what());
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Particles

std::pair<double, double> Particle::position_at(int64_t frame, int64_t height, int64_t width) const {
  const double dt = static_cast<double>(frame - birth_frame);
  return {wrap(x + vx * dt, static_cast<double>(width)), wrap(y + vy * dt, static_cast<double>(height))};
}

ParticleField sample_particles(const WeatherSpec& spec, int64_t height, int64_t width) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto count = static_cast<int64_t>(std::llround(spec.density * static_cast<double>(height * width) / 1e6));
  ParticleField field;
  field.particles.reserve(static_cast<size_t>(count));
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (int64_t i = 0; i < count; ++i) {
    Particle p;
    p.x = uniform(rng, 0.0, static_cast<double>(width));
    p.y = uniform(rng, 0.0, static_cast<double>(height));
    p.size = uniform(rng, spec.size_range);
    p.alpha = uniform(rng, spec.transparency_range);
    p.blur_sigma = uniform(rng, spec.blur_sigma_range);
    p.birth_frame = 0;
    if (spec.weather == WeatherLabel::snow) {
      // Flakes share the video's drift but wobble individually.
      p.vx = spec.motion.first + 0.25 * jitter(rng);
      p.vy = spec.motion.second * uniform(rng, 0.6, 1.4);
    } else {
      const double speed = uniform(rng, 0.85, 1.15);
      p.vx = spec.motion.first * speed;
      p.vy = spec.motion.second * speed;
    }
    field.particles.push_back(p);
  }
  return field;
}

torch::Tensor render_snow_alpha(const ParticleField& field, int64_t frame, int64_t height, int64_t width) {
  auto map = torch::zeros({height, width}, torch::kFloat64);
  double* dst = map.data_ptr<double>();
  for (const auto& p : field.particles) {
    const auto [px, py] = p.position_at(frame, height, width);
    const double radius = 0.5 * p.size;
    const int half = static_cast<int>(std::ceil(radius + 3.0 * p.blur_sigma)) + 1;
    const int side = 2 * half + 1;
    const auto cx = static_cast<int64_t>(std::floor(px));
    const auto cy = static_cast<int64_t>(std::floor(py));
    std::vector<double> patch(static_cast<size_t>(side * side), 0.0);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double dx = static_cast<double>(cx - half + x) - px;
        const double dy = static_cast<double>(cy - half + y) - py;
        const double dist = std::sqrt(dx * dx + dy * dy);
        // Disk with a one-pixel anti-aliased rim.
        patch[y * side + x] = p.alpha * std::clamp(radius + 0.5 - dist, 0.0, 1.0);
      }
    blur_patch(patch, side, p.blur_sigma);
    accumulate(dst, height, width, patch, side, cy - half, cx - half);
  }
  return map;
}

torch::Tensor render_rain_layer(const ParticleField& field, const WeatherSpec& spec, int64_t frame, int64_t height,
                                int64_t width) {
  auto map = torch::zeros({height, width}, torch::kFloat64);
  double* dst = map.data_ptr<double>();
  double ux = spec.motion.first;
  double uy = spec.motion.second;
  const double norm = std::hypot(ux, uy);
  if (norm < 1e-9) {
    ux = 0.0;
    uy = 1.0;
  } else {
    ux /= norm;
    uy /= norm;
  }
  for (const auto& p : field.particles) {
    const auto [px, py] = p.position_at(frame, height, width);
    const double half_len = 0.5 * p.size;
    const double sigma = std::max(p.blur_sigma, 0.3);
    const int half = static_cast<int>(std::ceil(half_len + 3.0 * sigma)) + 1;
    const int side = 2 * half + 1;
    const auto cx = static_cast<int64_t>(std::floor(px));
    const auto cy = static_cast<int64_t>(std::floor(py));
    std::vector<double> patch(static_cast<size_t>(side * side), 0.0);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double dx = static_cast<double>(cx - half + x) - px;
        const double dy = static_cast<double>(cy - half + y) - py;
        const double along = dx * ux + dy * uy;
        const double across = -dx * uy + dy * ux;
        const double overshoot = std::max(std::abs(along) - half_len, 0.0);
        patch[y * side + x] =
            p.alpha * std::exp(-0.5 * (across * across + overshoot * overshoot) / (sigma * sigma));
      }
    accumulate(dst, height, width, patch, side, cy - half, cx - half);
  }
  return map;
}

torch::Tensor haze_depth_map(const WeatherSpec& spec, int64_t frame, int64_t height, int64_t width) {
  std::mt19937_64 rng(splitmix64(spec.seed ^ 0x68617a65ull));
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k)
    waves.push_back({uniform(rng, 0.3, 1.5), uniform(rng, 0.2, 1.2), uniform(rng, 0.0, 2.0 * std::numbers::pi),
                     uniform(rng, 0.01, 0.03)});
  const double drift = 0.02 * spec.motion.first * static_cast<double>(frame);
  auto map = torch::empty({height, width}, torch::kFloat64);
  double* d = map.data_ptr<double>();
  for (int64_t y = 0; y < height; ++y) {
    const double ramp = 1.0 - static_cast<double>(y) / static_cast<double>(std::max<int64_t>(height - 1, 1));
    for (int64_t x = 0; x < width; ++x) {
      double v = 0.15 + 0.8 * ramp;
      for (const auto& w : waves)
        v += w.amp * std::sin(2.0 * std::numbers::pi *
                                  (w.fx * static_cast<double>(x) / static_cast<double>(width) +
                                   w.fy * static_cast<double>(y) / static_cast<double>(height)) +
                              w.phase + drift);
      d[y * width + x] = std::clamp(v, 0.05, 1.0);
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Compositing

torch::Tensor snow_composite(const torch::Tensor& clean, const torch::Tensor& alpha) {
  auto a = map_to_image(alpha).to(torch::kFloat64);
  return (1.0 - a) * clean.to(torch::kFloat64) + a;
}

torch::Tensor haze_composite(const torch::Tensor& clean, const torch::Tensor& depth, double beta, double airlight) {
  if (!(beta >= 0.0)) throw ConfigError("haze beta must be nonnegative");
  auto t = torch::exp(-beta * map_to_image(depth).to(torch::kFloat64));
  return t * clean.to(torch::kFloat64) + (1.0 - t) * airlight;
}

torch::Tensor screen_blend(const torch::Tensor& clean, const torch::Tensor& layer) {
  auto s = map_to_image(layer).to(torch::kFloat64);
  return 1.0 - (1.0 - clean.to(torch::kFloat64)) * (1.0 - s);
}

torch::Tensor synth_snow(const torch::Tensor& clean, const WeatherSpec& spec) {
  check_frames(clean);
  if (spec.weather != WeatherLabel::snow) throw ConfigError("synth_snow requires a snow spec");
  const auto field = sample_particles(spec, clean.size(1), clean.size(2));
  if (field.particles.empty()) return clean.clone();
  std::vector<torch::Tensor> out;
  for (int64_t t = 0; t < clean.size(0); ++t) {
    auto alpha = render_snow_alpha(field, t, clean.size(1), clean.size(2));
    out.push_back(snow_composite(clean[t], alpha).clamp(0.0, 1.0).to(clean.scalar_type()));
  }
  return torch::stack(out);
}

torch::Tensor synth_haze(const torch::Tensor& clean, const WeatherSpec& spec) {
  check_frames(clean);
  if (spec.weather != WeatherLabel::haze) throw ConfigError("synth_haze requires a haze spec");
  if (spec.density < 0.0) throw ConfigError("haze beta must be nonnegative");
  spec.validate();
  if (spec.density == 0.0) return clean.clone();
  std::vector<torch::Tensor> out;
  for (int64_t t = 0; t < clean.size(0); ++t) {
    auto depth = haze_depth_map(spec, t, clean.size(1), clean.size(2));
    out.push_back(haze_composite(clean[t], depth, spec.density, spec.airlight).clamp(0.0, 1.0).to(clean.scalar_type()));
  }
  return torch::stack(out);
}

torch::Tensor synth_rain(const torch::Tensor& clean, const WeatherSpec& spec) {
  check_frames(clean);
  if (spec.weather != WeatherLabel::rain) throw ConfigError("synth_rain requires a rain spec");
  const auto field = sample_particles(spec, clean.size(1), clean.size(2));
  if (field.particles.empty()) return clean.clone();
  std::vector<torch::Tensor> out;
  for (int64_t t = 0; t < clean.size(0); ++t) {
    auto layer = render_rain_layer(field, spec, t, clean.size(1), clean.size(2));
    out.push_back(screen_blend(clean[t], layer).clamp(0.0, 1.0).to(clean.scalar_type()));
  }
  return torch::stack(out);
}

torch::Tensor synthesize(const torch::Tensor& clean, const WeatherSpec& spec) {
  switch (spec.weather) {
    case WeatherLabel::rain: return synth_rain(clean, spec);
    case WeatherLabel::haze: return synth_haze(clean, spec);
    case WeatherLabel::snow: return synth_snow(clean, spec);
  }
  throw ConfigError("invalid weather label");
}

WeatherSpec sample_weather_spec(WeatherLabel weather, uint64_t seed, int64_t height, int64_t width) {
  std::mt19937_64 rng(splitmix64(seed));
  // Sizes were tuned at 64-128 px; scale them with the frame.
  const double scale = std::max(1.0, static_cast<double>(std::min(height, width)) / 96.0);
  WeatherSpec s;
  s.weather = weather;
  s.seed = seed;
  switch (weather) {
    case WeatherLabel::snow: {
      s.density = uniform(rng, 9000.0, 16000.0) / (scale * scale);
      const double lo = uniform(rng, 1.0, 2.0) * scale;
      s.size_range = {lo, lo + uniform(rng, 1.0, 3.0) * scale};
      s.transparency_range = {uniform(rng, 0.6, 0.8), uniform(rng, 0.85, 1.0)};
      const double blo = uniform(rng, 0.2, 0.5) * scale;
      s.blur_sigma_range = {blo, blo + uniform(rng, 0.3, 1.0) * scale};
      s.motion = {uniform(rng, -1.0, 1.0) * scale, uniform(rng, 0.8, 2.5) * scale};
      s.airlight = 1.0;
      break;
    }
    case WeatherLabel::rain: {
      s.density = uniform(rng, 3000.0, 5500.0) / scale;
      const double lo = uniform(rng, 7.0, 10.0) * scale;
      s.size_range = {lo, lo + uniform(rng, 2.0, 6.0) * scale};
      s.transparency_range = {uniform(rng, 0.35, 0.5), uniform(rng, 0.6, 0.8)};
      s.blur_sigma_range = {uniform(rng, 0.4, 0.6), uniform(rng, 0.6, 0.9)};
      s.motion = {uniform(rng, -2.0, 2.0) * scale, uniform(rng, 6.0, 10.0) * scale};
      s.airlight = 1.0;
      break;
    }
    case WeatherLabel::haze: {
      s.density = uniform(rng, 0.8, 1.6);
      s.size_range = {0.0, 0.0};
      s.transparency_range = {0.0, 0.0};
      s.blur_sigma_range = {0.0, 0.0};
      s.motion = {uniform(rng, -1.0, 1.0), 0.0};
      s.airlight = uniform(rng, 0.7, 0.95);
      break;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Procedural clean scenes

torch::Tensor generate_scene_video(uint64_t seed, int64_t frames, int64_t height, int64_t width) {
  std::mt19937_64 rng(splitmix64(seed));
  const double speed = uniform(rng, 0.5, 2.0);
  const auto canvas_w = width + static_cast<int64_t>(std::ceil(speed * static_cast<double>(frames))) + 2;
  const double H = static_cast<double>(height);

  std::array<double, 3> sky_top{uniform(rng, 0.3, 0.6), uniform(rng, 0.5, 0.75), uniform(rng, 0.75, 0.95)};
  std::array<double, 3> sky_bottom{uniform(rng, 0.6, 0.85), uniform(rng, 0.7, 0.9), uniform(rng, 0.8, 0.95)};
  std::array<double, 3> ground{uniform(rng, 0.2, 0.45), uniform(rng, 0.3, 0.55), uniform(rng, 0.1, 0.3)};
  std::array<double, 3> road{uniform(rng, 0.25, 0.4), 0.0, 0.0};
  road[1] = road[0];
  road[2] = road[0] + 0.02;
  const double horizon = H * uniform(rng, 0.45, 0.6);
  const double road_top = H * uniform(rng, 0.75, 0.85);

  struct Wave {
    double f, phase, amp;
  };
  std::vector<Wave> hills;
  for (int k = 0; k < 3; ++k)
    hills.push_back({uniform(rng, 0.005, 0.04), uniform(rng, 0.0, 6.28), uniform(rng, 0.02, 0.08) * H});

  struct Building {
    double x0, x1, top;
    std::array<double, 3> color;
  };
  std::vector<Building> buildings;
  for (double x = uniform(rng, 0.0, 10.0); x < static_cast<double>(canvas_w); x += uniform(rng, 6.0, 22.0)) {
    const double w = uniform(rng, 5.0, 18.0) * H / 64.0;
    buildings.push_back({x, x + w, horizon - uniform(rng, 0.08, 0.35) * H,
                         {uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.7), uniform(rng, 0.2, 0.7)}});
  }

  // Static canvas, then a horizontal pan with sub-pixel interpolation.
  auto canvas = torch::empty({height, canvas_w, 3}, torch::kFloat64);
  double* c = canvas.data_ptr<double>();
  std::uniform_real_distribution<double> grain(-0.03, 0.03);
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < canvas_w; ++x) {
      const double fy = static_cast<double>(y);
      const double fx = static_cast<double>(x);
      double hill = horizon;
      for (const auto& w : hills) hill += w.amp * std::sin(w.f * fx + w.phase);
      std::array<double, 3> px;
      if (fy >= road_top) {
        px = road;
        const bool lane = std::abs(fy - (road_top + H) / 2.0) < 0.6 && std::fmod(fx, 12.0) < 6.0;
        if (lane) px = {0.9, 0.9, 0.8};
      } else if (fy >= hill) {
        const double shade = 0.85 + 0.15 * std::sin(0.3 * fx + 0.5 * fy);
        px = {ground[0] * shade, ground[1] * shade, ground[2] * shade};
      } else {
        const double t = fy / std::max(hill, 1.0);
        for (int k = 0; k < 3; ++k) px[k] = sky_top[k] * (1.0 - t) + sky_bottom[k] * t;
      }
      for (const auto& b : buildings) {
        if (fx >= b.x0 && fx < b.x1 && fy >= b.top && fy < road_top) {
          px = b.color;
          const bool window = std::fmod(fx - b.x0, 4.0) < 1.5 && std::fmod(fy - b.top, 5.0) < 2.0 &&
                              fx - b.x0 > 1.0 && b.x1 - fx > 1.0;
          if (window) px = {px[0] * 0.4 + 0.5, px[1] * 0.4 + 0.5, px[2] * 0.4 + 0.35};
        }
      }
      const double g = grain(rng);
      for (int k = 0; k < 3; ++k) c[(y * canvas_w + x) * 3 + k] = std::clamp(px[k] + g, 0.0, 1.0);
    }

  auto out = torch::empty({frames, height, width, 3}, torch::kFloat32);
  for (int64_t t = 0; t < frames; ++t) {
    const double shift = speed * static_cast<double>(t);
    const auto base = static_cast<int64_t>(std::floor(shift));
    const double frac = shift - static_cast<double>(base);
    auto a = canvas.slice(1, base, base + width);
    auto b = canvas.slice(1, base + 1, base + 1 + width);
    out[t] = ((1.0 - frac) * a + frac * b).to(torch::kFloat32);
  }
  return out;
}

void generate_clean_sources(const fs::path& clean_root, int64_t count, int64_t frames, int64_t height, int64_t width,
                            uint64_t seed) {
  for (int64_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03lld", static_cast<long long>(i));
    auto video = generate_scene_video(derive_seed(seed, name), frames, height, width);
    for (int64_t t = 0; t < frames; ++t) save_frame(clean_root / name / frame_filename(t), video[t]);
  }
}

// ---------------------------------------------------------------------------
// Dataset construction

int64_t train_count_for(int64_t count, double train_fraction) {
  if (count <= 1) return count;
  const auto n = static_cast<int64_t>(std::llround(static_cast<double>(count) * train_fraction));
  return std::clamp<int64_t>(n, 1, count - 1);
}

namespace {

uint64_t hash_bytes(const torch::Tensor& bytes, uint64_t h) {
  auto c = bytes.contiguous();
  return fnv1a(std::string_view(reinterpret_cast<const char*>(c.data_ptr<uint8_t>()), static_cast<size_t>(c.numel())), h);
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

BuildResult build_dataset(const BuildOptions& options) {
  if (!fs::is_directory(options.clean_root))
    throw IoError("clean root does not exist: " + options.clean_root.string());
  if (options.per_weather_counts.empty()) throw ConfigError("no weather counts given");
  int64_t needed = 0;
  for (const auto& [w, n] : options.per_weather_counts) {
    if (n < 1) throw ConfigError("count for " + std::string(to_string(w)) + " must be >= 1");
    needed += n;
  }
  std::vector<std::string> sources;
  for (const auto& e : fs::directory_iterator(options.clean_root))
    if (e.is_directory()) sources.push_back(e.path().filename().string());
  std::sort(sources.begin(), sources.end());
  if (static_cast<int64_t>(sources.size()) < needed)
    throw ConfigError("insufficient source videos in " + options.clean_root.string() + ": need " +
                      std::to_string(needed) + ", found " + std::to_string(sources.size()));
  std::mt19937_64 rng(splitmix64(options.global_seed));
  std::shuffle(sources.begin(), sources.end(), rng);

  const fs::path manifest_path = options.out_root / "manifest.json";
  std::string previous_digest;
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      previous_digest = json::parse(in).value("digest", "");
    } catch (const json::exception&) {
    }
  }

  std::vector<ManifestEntry> entries;
  uint64_t digest = fnv1a("viws-dataset-v1");
  bool all_unchanged = true;
  size_t next_source = 0;
  for (const WeatherLabel weather : kAllWeathers) {
    const auto it = options.per_weather_counts.find(weather);
    if (it == options.per_weather_counts.end()) continue;
    const int64_t count = it->second;
    const int64_t n_train = train_count_for(count, options.train_fraction);
    for (int64_t i = 0; i < count; ++i) {
      const std::string& source = sources[next_source++];
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%03lld", std::string(to_string(weather)).c_str(), static_cast<long long>(i));
      const std::string video_id = id;

      const auto src_frames = list_frames(options.clean_root / source);
      if (src_frames.empty()) throw ConfigError("source video has no frames: " + (options.clean_root / source).string());
      std::vector<torch::Tensor> loaded;
      for (const auto& p : src_frames) loaded.push_back(load_frame(p));
      auto clean = torch::stack(loaded);
      const auto spec = sample_weather_spec(weather, derive_seed(options.global_seed, video_id), clean.size(1),
                                            clean.size(2));
      auto clean_q = quantize_frame(clean);
      auto degraded_q = quantize_frame(synthesize(clean, spec));

      json sidecar = {{"video_id", video_id}, {"source", source}, {"spec", spec.to_json()}};
      uint64_t vh = fnv1a(sidecar.dump());
      vh = hash_bytes(clean_q, vh);
      vh = hash_bytes(degraded_q, vh);
      sidecar["frames_digest"] = hex64(vh);
      digest = fnv1a(hex64(vh), digest);

      const fs::path rel = fs::path(std::string(to_string(weather))) / video_id;
      const fs::path dir = options.out_root / rel;
      const fs::path sidecar_path = dir / "weather_spec.json";
      bool unchanged = false;
      if (fs::exists(sidecar_path)) {
        std::ifstream in(sidecar_path);
        try {
          unchanged = json::parse(in).value("frames_digest", "") == hex64(vh) &&
                      static_cast<int64_t>(list_frames(dir / "degraded").size()) == clean.size(0) &&
                      static_cast<int64_t>(list_frames(dir / "clean").size()) == clean.size(0);
        } catch (const std::exception&) {
          unchanged = false;
        }
      }
      if (!unchanged) {
        all_unchanged = false;
        fs::remove_all(dir);
        for (int64_t t = 0; t < clean.size(0); ++t) {
          save_frame(dir / "clean" / frame_filename(t), clean_q[t].to(torch::kFloat32) / 255.0f);
          save_frame(dir / "degraded" / frame_filename(t), degraded_q[t].to(torch::kFloat32) / 255.0f);
        }
        std::ofstream out(sidecar_path, std::ios::binary);
        out << sidecar.dump(2) << "\n";
      }

      entries.push_back({video_id, weather, rel / "clean", rel / "degraded", clean.size(0),
                         i < n_train ? Split::train : Split::test});
    }
  }

  BuildResult result;
  result.manifest = DatasetManifest(options.out_root, entries);
  result.digest = digest;
  result.up_to_date = all_unchanged && previous_digest == hex64(digest);
  if (!result.up_to_date) {
    auto doc = json::parse(result.manifest.to_json_string());
    doc["digest"] = hex64(digest);
    doc["global_seed"] = options.global_seed;
    doc["train_fraction"] = options.train_fraction;
    fs::create_directories(options.out_root);
    std::ofstream out(manifest_path, std::ios::binary);
    out << doc.dump(2) << "\n";
  }
  return result;
}

}  // namespace viws
