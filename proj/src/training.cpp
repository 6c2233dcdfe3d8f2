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

#include "viws/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "viws/errors.hpp"
#include "viws/util.hpp"

namespace viws {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (clips_per_weather < 1 || batch_size != kNumWeathers * clips_per_weather)
    throw ConfigError("batch_size must equal 3 * clips_per_weather (got " + std::to_string(batch_size) + " vs " +
                      std::to_string(clips_per_weather) + ")");
  if (epochs < 1 || steps_per_epoch < 1) throw ConfigError("epochs and steps_per_epoch must be positive");
  if (!(lr0 >= 0.0) || !(lr_decay_factor > 0.0) || lr_decay_every < 1) throw ConfigError("invalid learning-rate schedule");
  if (warmup_iters < 0) throw ConfigError("warmup_iters must be >= 0");
  if (n < 1) throw ConfigError("clip half-length n must be >= 1");
  if (crop < 32 || crop % 32 != 0) throw ConfigError("crop must be a positive multiple of 32");
  if (loss.gamma1 < 0.0 || loss.gamma2 < 0.0) throw ConfigError("loss weights must be nonnegative");
}

json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"clips_per_weather", clips_per_weather},
          {"epochs", epochs},
          {"steps_per_epoch", steps_per_epoch},
          {"lr0", lr0},
          {"lr_decay", {{"factor", lr_decay_factor}, {"every", lr_decay_every}}},
          {"warmup_iters", warmup_iters},
          {"crop", crop},
          {"n", n},
          {"seed", seed},
          {"flip", flip},
          {"gamma1", loss.gamma1},
          {"gamma2", loss.gamma2},
          {"perceptual", perceptual.to_json()}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.batch_size = j.at("batch_size").get<int64_t>();
    c.clips_per_weather = j.at("clips_per_weather").get<int64_t>();
    c.epochs = j.at("epochs").get<int64_t>();
    c.steps_per_epoch = j.at("steps_per_epoch").get<int64_t>();
    c.lr0 = j.at("lr0").get<double>();
    c.lr_decay_factor = j.at("lr_decay").at("factor").get<double>();
    c.lr_decay_every = j.at("lr_decay").at("every").get<int64_t>();
    c.warmup_iters = j.at("warmup_iters").get<int64_t>();
    c.crop = j.at("crop").get<int64_t>();
    c.n = j.at("n").get<int64_t>();
    c.seed = j.at("seed").get<uint64_t>();
    c.flip = j.at("flip").get<bool>();
    c.loss.gamma1 = j.at("gamma1").get<double>();
    c.loss.gamma2 = j.at("gamma2").get<double>();
    c.perceptual = PerceptualConfig::from_json(j.at("perceptual"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::reference() {
  TrainConfig c;
  c.batch_size = 12;
  c.clips_per_weather = 4;
  c.epochs = 500;
  c.lr0 = 2e-4;
  c.lr_decay_every = 100;
  c.warmup_iters = 0;
  c.crop = 224;
  c.perceptual.channels = {64, 128, 256};
  return c;
}

double lr_at(int64_t epoch, const TrainConfig& config) {
  if (epoch < 0) throw RangeError("epoch must be >= 0");
  return config.lr0 * std::pow(config.lr_decay_factor, static_cast<double>(epoch / config.lr_decay_every));
}

double lr_for_step(int64_t iteration, const TrainConfig& config) {
  const int64_t steps_per_epoch = config.steps_per_epoch;
  double lr = lr_at(iteration / steps_per_epoch, config);
  if (config.warmup_iters > 0 && iteration < config.warmup_iters)
    lr *= static_cast<double>(iteration + 1) / static_cast<double>(config.warmup_iters);
  return lr;
}

// ---------------------------------------------------------------------------
// Data

VideoCache::VideoCache(const DatasetManifest& manifest, Split split) {
  for (const auto& e : manifest.select(split)) {
    Video v;
    v.entry = e;
    std::vector<torch::Tensor> clean, degraded;
    for (int64_t i = 0; i < e.num_frames; ++i) {
      clean.push_back(load_frame(manifest.resolve(e.clean_dir) / frame_filename(i)));
      degraded.push_back(load_frame(manifest.resolve(e.degraded_dir) / frame_filename(i)));
    }
    v.clean = torch::stack(clean);
    v.degraded = torch::stack(degraded);
    videos_.push_back(std::move(v));
  }
}

std::vector<const VideoCache::Video*> VideoCache::of_weather(WeatherLabel w) const {
  std::vector<const Video*> out;
  for (const auto& v : videos_)
    if (v.entry.weather == w) out.push_back(&v);
  return out;
}

Batch build_batch(const VideoCache& cache, const TrainConfig& config, std::mt19937_64& rng) {
  config.validate();
  const int64_t T = 2 * config.n + 1;
  std::vector<torch::Tensor> frames, targets;
  std::vector<int64_t> labels;
  Batch batch;
  for (const WeatherLabel w : kAllWeathers) {
    const auto videos = cache.of_weather(w);
    if (videos.empty()) throw ConfigError("no training videos for weather '" + std::string(to_string(w)) + "'");
    for (int64_t k = 0; k < config.clips_per_weather; ++k) {
      const auto* v = videos[std::uniform_int_distribution<size_t>(0, videos.size() - 1)(rng)];
      const int64_t N = v->degraded.size(0);
      if (N < T) throw ConfigError("video " + v->entry.video_id + " shorter than a clip");
      const int64_t center = std::uniform_int_distribution<int64_t>(config.n, N - 1 - config.n)(rng);
      const uint64_t crop_seed = rng();
      const auto window = draw_crop(v->degraded.size(1), v->degraded.size(2), config.crop, crop_seed, config.flip);
      auto crop = [&](const torch::Tensor& t) {
        auto c = t.slice(-3, window.top, window.top + window.size).slice(-2, window.left, window.left + window.size);
        return window.flip ? c.flip({-2}) : c;
      };
      auto clip = crop(v->degraded.slice(0, center - config.n, center + config.n + 1));  // (T, h, w, 3)
      frames.push_back(clip.permute({0, 3, 1, 2}));
      targets.push_back(crop(v->clean[center]).permute({2, 0, 1}));
      labels.push_back(static_cast<int64_t>(w));
      batch.video_ids.push_back(v->entry.video_id);
      batch.centers.push_back(center);
    }
  }
  batch.frames = torch::stack(frames).contiguous();
  batch.targets = torch::stack(targets).contiguous();
  batch.labels = torch::tensor(labels, torch::kInt64);
  return batch;
}

// ---------------------------------------------------------------------------
// Trainer

json StepResult::to_json() const {
  return {{"iteration", iteration}, {"epoch", epoch},           {"lr", lr},
          {"lambda", lambda},       {"smooth_l1", smooth_l1},   {"perceptual", perceptual},
          {"adversarial", adversarial}, {"total", total}};
}

Trainer::Trainer(ModelConfig model_config, TrainConfig train_config)
    : model_config_(std::move(model_config)), train_config_(std::move(train_config)), rng_(splitmix64(train_config_.seed)) {
  train_config_.validate();
  if (model_config_.clip_length != 2 * train_config_.n + 1)
    throw ConfigError("model clip_length must equal 2n+1 of the train config");
  model_ = ViWSNet(model_config_);
  extractor_ = PerceptualExtractor(train_config_.perceptual);
  std::vector<torch::Tensor> params;
  for (auto& p : model_->parameters())
    if (p.requires_grad()) params.push_back(p);
  optimizer_ = std::make_unique<torch::optim::Adam>(params, torch::optim::AdamOptions(train_config_.lr0));
}

double Trainer::progress() const {
  return std::min(1.0, static_cast<double>(iteration_) / static_cast<double>(train_config_.total_iterations()));
}

double Trainer::current_lambda() const { return lambda_schedule(progress()); }

std::vector<std::pair<std::string, torch::Tensor>> Trainer::trainable_parameters() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : model_->named_parameters())
    if (p.value().requires_grad()) out.emplace_back(p.key(), p.value());
  return out;
}

StepResult Trainer::step(const Batch& batch) {
  StepResult r;
  r.lambda = current_lambda();
  r.epoch = epoch();
  r.lr = lr_for_step(iteration_, train_config_);
  for (auto& group : optimizer_->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(r.lr);

  model_->train();
  auto out = model_->forward(batch.frames, r.lambda, model_config_.use_adversarial);
  auto losses = total_loss(out.restored, batch.targets, out.logits, batch.labels, train_config_.loss, extractor_);
  r.smooth_l1 = losses.smooth_l1.item<double>();
  r.perceptual = losses.perceptual.item<double>();
  r.adversarial = losses.adversarial.item<double>();
  r.total = losses.total.item<double>();
  if (!std::isfinite(r.total)) {
    std::ostringstream os;
    os << "non-finite loss at iteration " << iteration_ << ": smooth_l1=" << r.smooth_l1
       << " perceptual=" << r.perceptual << " adversarial=" << r.adversarial << " total=" << r.total;
    throw NonFiniteLoss(os.str());
  }
  optimizer_->zero_grad();
  losses.total.backward();
  optimizer_->step();
  ++iteration_;
  r.iteration = iteration_;
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (little-endian host order):
//   "VIWSCKPT" u32 version u64 model_hash
//   str model_config str train_config i64 iteration str rng_state
//   u64 n_params { str name tensor value i64 adam_step [tensor exp_avg tensor exp_avg_sq] }*
//   u64 fnv1a checksum of everything before it

namespace {

constexpr char kMagic[8] = {'V', 'I', 'W', 'S', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<uint64_t>(s.size());
    buf_.append(s);
  }
  void tensor(const torch::Tensor& t) {
    auto c = t.detach().to(torch::kCPU).contiguous();
    uint8_t code = c.scalar_type() == torch::kFloat64 ? 2 : 1;
    if (code == 1) c = c.to(torch::kFloat32);
    pod(code);
    pod<uint32_t>(static_cast<uint32_t>(c.dim()));
    for (auto d : c.sizes()) pod<int64_t>(d);
    buf_.append(static_cast<const char*>(c.data_ptr()), c.numel() * c.element_size());
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : data_(bytes) {}
  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<uint64_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  torch::Tensor tensor() {
    const auto code = pod<uint8_t>();
    if (code != 1 && code != 2) throw LoadError("checkpoint: bad tensor dtype code");
    const auto ndim = pod<uint32_t>();
    if (ndim > 8) throw LoadError("checkpoint: bad tensor rank");
    std::vector<int64_t> sizes;
    for (uint32_t i = 0; i < ndim; ++i) sizes.push_back(pod<int64_t>());
    auto t = torch::empty(sizes, code == 2 ? torch::kFloat64 : torch::kFloat32);
    const size_t nbytes = t.numel() * t.element_size();
    need(nbytes);
    std::memcpy(t.data_ptr(), data_.data() + pos_, nbytes);
    pos_ += nbytes;
    return t;
  }
  size_t pos() const { return pos_; }

 private:
  void need(size_t n) const {
    if (pos_ + n > data_.size()) throw LoadError("checkpoint truncated");
  }
  std::string_view data_;
  size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Header {
  uint64_t model_hash = 0;
  std::string model_config;
  std::string train_config;
};

// Verifies magic, version and checksum; leaves the reader after the train config.
Header read_header(Reader& r, std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + sizeof(uint64_t) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw LoadError("not a viws checkpoint");
  uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - sizeof(uint64_t), sizeof(uint64_t));
  if (fnv1a(bytes.substr(0, bytes.size() - sizeof(uint64_t))) != stored) throw LoadError("checkpoint checksum mismatch (corrupt file)");
  for (size_t i = 0; i < sizeof(kMagic); ++i) r.pod<char>();
  const auto version = r.pod<uint32_t>();
  if (version != kVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
  Header h;
  h.model_hash = r.pod<uint64_t>();
  h.model_config = r.str();
  h.train_config = r.str();
  return h;
}

}  // namespace

std::string Trainer::serialize() const {
  Writer w;
  for (char c : kMagic) w.pod(c);
  w.pod(kVersion);
  w.pod(model_config_.hash());
  w.str(model_config_.to_json().dump());
  w.str(train_config_.to_json().dump());
  w.pod<int64_t>(iteration_);
  std::ostringstream rng;
  rng << rng_;
  w.str(rng.str());

  const auto params = model_->named_parameters();
  const auto& state = optimizer_->state();
  w.pod<uint64_t>(params.size());
  for (const auto& p : params) {
    w.str(p.key());
    w.tensor(p.value());
    auto it = state.find(p.value().unsafeGetTensorImpl());
    if (it == state.end()) {
      w.pod<int64_t>(-1);
    } else {
      const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
      w.pod<int64_t>(s.step());
      w.tensor(s.exp_avg());
      w.tensor(s.exp_avg_sq());
    }
  }
  auto& bytes = w.bytes();
  const uint64_t checksum = fnv1a(bytes);
  bytes.append(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  return bytes;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    const auto bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void Trainer::deserialize(const std::string& bytes) {
  Reader r(bytes);
  const auto header = read_header(r, bytes);
  if (header.model_hash != model_config_.hash())
    throw LoadError("checkpoint model config does not match (hash mismatch); stored config: " + header.model_config);
  const auto iteration = r.pod<int64_t>();
  const auto rng_state = r.str();

  const auto params = model_->named_parameters();
  const auto count = r.pod<uint64_t>();
  if (count != params.size()) throw LoadError("checkpoint parameter count mismatch");
  torch::NoGradGuard no_grad;
  auto& state = optimizer_->state();
  state.clear();
  for (const auto& p : params) {
    const auto name = r.str();
    if (name != p.key()) throw LoadError("checkpoint parameter order mismatch at " + name);
    auto value = r.tensor();
    if (!value.sizes().equals(p.value().sizes())) throw LoadError("checkpoint shape mismatch for " + name);
    p.value().copy_(value);
    const auto step = r.pod<int64_t>();
    if (step >= 0) {
      auto s = std::make_unique<torch::optim::AdamParamState>();
      s->step(step);
      s->exp_avg(r.tensor().to(p.value().dtype()));
      s->exp_avg_sq(r.tensor().to(p.value().dtype()));
      state[p.value().unsafeGetTensorImpl()] = std::move(s);
    }
  }
  if (r.pos() + sizeof(uint64_t) != bytes.size()) throw LoadError("checkpoint has trailing bytes");
  iteration_ = iteration;
  std::istringstream rs(rng_state);
  rs >> rng_;
  if (!rs) throw LoadError("checkpoint rng state unreadable");
}

void Trainer::load_checkpoint(const std::filesystem::path& path) { deserialize(read_file(path)); }

ModelConfig read_checkpoint_model_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes);
  const auto header = read_header(r, bytes);
  try {
    return ModelConfig::from_json(json::parse(header.model_config));
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint model config unreadable: ") + e.what());
  }
}

ViWSNet load_model(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes);
  const auto header = read_header(r, bytes);
  ModelConfig config;
  try {
    config = ModelConfig::from_json(json::parse(header.model_config));
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint model config unreadable: ") + e.what());
  }
  ViWSNet model(config);
  r.pod<int64_t>();
  r.str();
  const auto params = model->named_parameters();
  if (r.pod<uint64_t>() != params.size()) throw LoadError("checkpoint parameter count mismatch");
  torch::NoGradGuard no_grad;
  for (const auto& p : params) {
    if (r.str() != p.key()) throw LoadError("checkpoint parameter order mismatch");
    p.value().copy_(r.tensor());
    if (r.pod<int64_t>() >= 0) {
      r.tensor();
      r.tensor();
    }
  }
  model->eval();
  return model;
}

}  // namespace viws
