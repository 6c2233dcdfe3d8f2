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

#include "viws/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "viws/errors.hpp"
#include "viws/util.hpp"

namespace viws {

using json = nlohmann::json;

namespace {

// Every key of `user` must exist in `schema`; nested objects are checked recursively.
void check_keys(const json& user, const json& schema, const std::string& where) {
  if (!user.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (schema[key].is_object() && !schema[key].empty()) check_keys(value, schema[key], path);
  }
}

// Base JSON with user values merged in, after key checking.
json overlay(json base, const json& user, const std::string& where) {
  check_keys(user, base, where);
  base.merge_patch(user);
  return base;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string path_str(const fs::path& p) { return p.generic_string(); }

json synthesize_json(const SynthesizeSection& s) {
  json counts = json::object();
  for (const auto& [w, n] : s.per_weather) counts[std::string(to_string(w))] = n;
  return {{"clean_root", path_str(s.clean_root)},
          {"generate", {{"count", s.generate_count}, {"frames", s.generate_frames}, {"height", s.generate_height}, {"width", s.generate_width}}},
          {"per_weather", counts},
          {"train_fraction", s.train_fraction}};
}

json train_json(const TrainSection& t) {
  auto j = t.config.to_json();
  j["validate_every"] = t.validate_every;
  j["validation_frames"] = t.validation_frames;
  j["checkpoint_every"] = t.checkpoint_every;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

json RunConfig::to_json() const {
  return {{"output_root", path_str(output_root)},
          {"manifest", path_str(manifest)},
          {"seed", seed},
          {"model", {{"preset", model_preset}, {"variant", model_variant}, {"config", model.to_json()}}},
          {"synthesize", synthesize_json(synthesize)},
          {"train", train_json(train)},
          {"infer", {{"input", path_str(infer.input)}, {"output", path_str(infer.output)}, {"chunk", infer.chunk}}},
          {"evaluate", {{"predictions", path_str(evaluate.predictions)}, {"split", std::string(to_string(evaluate.split))}}}};
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  const json top_schema = {{"output_root", ""}, {"manifest", ""}, {"seed", 0}, {"model", json::object()},
                           {"synthesize", json::object()}, {"train", json::object()},
                           {"infer", json::object()}, {"evaluate", json::object()}};
  check_keys(j, top_schema, "");
  try {
    if (j.contains("output_root")) c.output_root = j["output_root"].get<std::string>();
    if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();

    // Model: preset + variant, then field overrides under "config".
    const json model_user = j.value("model", json::object());
    check_keys(model_user, {{"preset", ""}, {"variant", ""}, {"config", json::object()}}, "model");
    c.model_preset = model_user.value("preset", c.model_preset);
    c.model_variant = model_user.value("variant", c.model_variant);
    auto base_model = ModelConfig::preset(c.model_preset).with_variant(c.model_variant);
    base_model.init_seed = c.seed;
    c.model = ModelConfig::from_json(overlay(base_model.to_json(), model_user.value("config", json::object()), "model.config"));

    const auto syn = overlay(synthesize_json(c.synthesize), j.value("synthesize", json::object()), "synthesize");
    c.synthesize.clean_root = syn["clean_root"].get<std::string>();
    c.synthesize.generate_count = syn["generate"]["count"].get<int64_t>();
    c.synthesize.generate_frames = syn["generate"]["frames"].get<int64_t>();
    c.synthesize.generate_height = syn["generate"]["height"].get<int64_t>();
    c.synthesize.generate_width = syn["generate"]["width"].get<int64_t>();
    c.synthesize.per_weather.clear();
    for (const auto& [name, count] : syn["per_weather"].items()) {
      if (!count.is_null()) c.synthesize.per_weather[parse_weather(name)] = count.get<int64_t>();
    }
    c.synthesize.train_fraction = syn["train_fraction"].get<double>();

    TrainSection base_train;
    base_train.config.seed = c.seed;
    base_train.config.n = c.model.clip_length / 2;
    auto tr = overlay(train_json(base_train), j.value("train", json::object()), "train");
    c.train.validate_every = tr["validate_every"].get<int64_t>();
    c.train.validation_frames = tr["validation_frames"].get<int64_t>();
    c.train.checkpoint_every = tr["checkpoint_every"].get<int64_t>();
    tr.erase("validate_every");
    tr.erase("validation_frames");
    tr.erase("checkpoint_every");
    c.train.config = TrainConfig::from_json(tr);

    const auto inf = overlay({{"input", ""}, {"output", ""}, {"chunk", c.infer.chunk}}, j.value("infer", json::object()), "infer");
    c.infer.input = inf["input"].get<std::string>();
    c.infer.output = inf["output"].get<std::string>();
    c.infer.chunk = inf["chunk"].get<int64_t>();

    const auto ev = overlay({{"predictions", ""}, {"split", "test"}}, j.value("evaluate", json::object()), "evaluate");
    c.evaluate.predictions = ev["predictions"].get<std::string>();
    c.evaluate.split = parse_split(ev["split"].get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  if (c.model.clip_length != 2 * c.train.config.n + 1)
    throw ConfigError("train.n must match the model clip length (T = 2n+1)");
  if (c.infer.chunk < 1) throw ConfigError("infer.chunk must be >= 1");
  if (c.train.validate_every < 0 || c.train.checkpoint_every < 0 || c.train.validation_frames < 0)
    throw ConfigError("train validation/checkpoint intervals must be >= 0");

  c.output_root = resolve(c.output_root, base_dir);
  c.manifest = resolve(c.manifest, base_dir);
  c.synthesize.clean_root = resolve(c.synthesize.clean_root, base_dir);
  c.infer.input = resolve(c.infer.input, base_dir);
  c.infer.output = resolve(c.infer.output, base_dir);
  c.evaluate.predictions = resolve(c.evaluate.predictions, base_dir);
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  auto c = from_json(j, fs::absolute(path).parent_path());
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) c.output_root = fs::absolute(env);
  return c;
}

void write_resolved_config(const RunConfig& config, const fs::path& dir, const std::string& command) {
  write_text(dir / ("resolved_config." + command + ".json"), config.to_json().dump(2) + "\n");
}

std::string manifest_table(const DatasetManifest& manifest) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "split" << std::right << std::setw(8) << "Rain" << std::setw(8) << "Haze"
     << std::setw(8) << "Snow" << std::setw(8) << "Total" << "\n";
  for (const auto split : {Split::train, Split::test}) {
    os << std::left << std::setw(8) << to_string(split) << std::right;
    for (const auto w : kAllWeathers) os << std::setw(8) << manifest.select(split, w).size();
    os << std::setw(8) << manifest.select(split).size() << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

BuildResult cmd_synthesize(const RunConfig& config, std::ostream& out) {
  const auto& s = config.synthesize;
  BuildOptions options;
  options.clean_root = s.clean_root;
  options.out_root = config.dataset_root();
  options.per_weather_counts = s.per_weather;
  options.train_fraction = s.train_fraction;
  options.global_seed = config.seed;

  int64_t generate = s.generate_count;
  if (options.clean_root.empty()) {
    options.clean_root = config.output_root / "sources";
    if (generate == 0)
      for (const auto& [w, n] : s.per_weather) generate += n;
  }
  if (generate > 0) {
    generate_clean_sources(options.clean_root, generate, s.generate_frames, s.generate_height, s.generate_width,
                           derive_seed(config.seed, "sources"));
    out << "generated " << generate << " clean source videos in " << options.clean_root.string() << "\n";
  }
  auto result = build_dataset(options);
  write_resolved_config(config, config.dataset_root(), "synthesize");
  out << manifest_table(result.manifest);
  std::ostringstream digest;
  digest << std::hex << std::setw(16) << std::setfill('0') << result.digest;
  if (result.up_to_date)
    out << "up-to-date, outputs identical (digest " << digest.str() << ")\n";
  else
    out << "wrote " << config.dataset_root().string() << " (digest " << digest.str() << ")\n";
  return result;
}

namespace {

struct BestRecord {
  double psnr = -std::numeric_limits<double>::infinity();
  int64_t iteration = -1;
};

BestRecord read_best(const fs::path& path) {
  BestRecord b;
  std::ifstream in(path);
  if (!in) return b;
  try {
    const auto j = json::parse(in);
    b.psnr = j.at("average_psnr").get<double>();
    b.iteration = j.at("iteration").get<int64_t>();
  } catch (const json::exception&) {
    throw LoadError("unreadable " + path.string());
  }
  return b;
}

// Keeps only log rows at or before `iteration` (rows written after the last
// checkpoint of an interrupted run).
void truncate_log(const fs::path& path, int64_t iteration) {
  std::ifstream in(path);
  if (!in) return;
  std::string kept, line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      if (json::parse(line).at("iteration").get<int64_t>() <= iteration) kept += line + "\n";
    } catch (const json::exception&) {
      break;
    }
  }
  in.close();
  write_text(path, kept);
}

}  // namespace

int64_t cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out) {
  const auto dir = config.train_dir();
  fs::create_directories(dir);
  const auto manifest = DatasetManifest::load(config.manifest_path());
  manifest.validate(true);

  Trainer trainer(config.model, config.train.config);
  const auto log_path = dir / "train_log.jsonl";
  const auto val_path = dir / "validation.jsonl";
  const auto best_path = dir / "best.json";
  BestRecord best;
  if (options.resume) {
    const auto from = options.checkpoint.value_or(dir / "last.ckpt");
    trainer.load_checkpoint(from);
    truncate_log(log_path, trainer.iteration());
    truncate_log(val_path, trainer.iteration());
    best = read_best(best_path);
    out << "resumed from " << from.string() << " at iteration " << trainer.iteration() << "\n";
  } else {
    write_text(log_path, "");
    write_text(val_path, "");
    fs::remove(best_path);
  }
  write_resolved_config(config, dir, "train");

  VideoCache cache(manifest, Split::train);
  std::ofstream log(log_path, std::ios::app);
  std::ofstream val_log(val_path, std::ios::app);
  const int64_t total = config.train.config.total_iterations();
  const int64_t stop = options.max_steps > 0 ? std::min(total, trainer.iteration() + options.max_steps) : total;

  auto validate = [&] {
    auto summary = evaluate_model(trainer.model(), manifest, Split::test, config.train.validation_frames);
    out << "validation @ iteration " << trainer.iteration() << "\n" << summary.table();
    auto row = summary.to_json();
    row["iteration"] = trainer.iteration();
    val_log << row.dump() << "\n";
    val_log.flush();
    if (summary.average_psnr > best.psnr) {
      best = {summary.average_psnr, trainer.iteration()};
      trainer.save_checkpoint(dir / "best.ckpt");
      write_text(best_path, json{{"average_psnr", best.psnr}, {"iteration", best.iteration}}.dump() + "\n");
    }
  };

  while (trainer.iteration() < stop) {
    const auto batch = trainer.next_batch(cache);
    StepResult r;
    try {
      r = trainer.step(batch);
    } catch (const NonFiniteLoss&) {
      trainer.save_checkpoint(dir / "failed.ckpt");
      throw;
    }
    log << r.to_json().dump() << "\n";
    if (r.iteration % 50 == 0 || r.iteration == stop) {
      log.flush();
      out << "iter " << r.iteration << "/" << total << " lr " << r.lr << " lambda " << std::setprecision(4) << r.lambda
          << " total " << r.total << " (sL1 " << r.smooth_l1 << ", perc " << r.perceptual << ", adv " << r.adversarial
          << ")\n";
    }
    const bool last = r.iteration == stop;
    if (config.train.validate_every > 0 && (r.iteration % config.train.validate_every == 0 || r.iteration == total))
      validate();
    if (last || (config.train.checkpoint_every > 0 && r.iteration % config.train.checkpoint_every == 0))
      trainer.save_checkpoint(dir / "last.ckpt");
  }
  log.flush();
  if (best.iteration < 0 && trainer.iteration() == total) validate();
  if (!fs::exists(dir / "last.ckpt")) trainer.save_checkpoint(dir / "last.ckpt");
  return trainer.iteration();
}

fs::path cmd_infer(const RunConfig& config, const std::optional<fs::path>& checkpoint, std::ostream& out) {
  const auto ckpt = checkpoint.value_or(config.train_dir() / "best.ckpt");
  auto model = load_model(ckpt);
  const auto out_dir = config.predictions_dir();

  auto run = [&](const std::vector<fs::path>& frames, const fs::path& dest) {
    std::vector<torch::Tensor> loaded;
    for (const auto& f : frames) {
      loaded.push_back(load_frame(f));
      if (!loaded.back().sizes().equals(loaded.front().sizes()))
        throw ShapeError("frame " + f.string() + " differs in size from " + frames.front().string());
    }
    const auto restored = restore_video(model, torch::stack(loaded), config.infer.chunk);
    for (size_t i = 0; i < frames.size(); ++i) save_frame(dest / frames[i].filename(), restored[static_cast<int64_t>(i)]);
    out << "restored " << frames.size() << " frames -> " << dest.string() << "\n";
  };

  if (!config.infer.input.empty()) {
    if (!fs::is_directory(config.infer.input)) throw IoError("input directory does not exist: " + config.infer.input.string());
    const auto frames = list_frames(config.infer.input);
    if (static_cast<int64_t>(frames.size()) < model->config().clip_length)
      throw RangeError("input video has " + std::to_string(frames.size()) + " frames; at least " +
                       std::to_string(model->config().clip_length) + " are needed");
    run(frames, out_dir);
  } else {
    const auto manifest = DatasetManifest::load(config.manifest_path());
    for (const auto& e : manifest.select(config.evaluate.split)) {
      std::vector<fs::path> frames;
      for (int64_t t = 0; t < e.num_frames; ++t) frames.push_back(manifest.resolve(e.degraded_dir) / frame_filename(t));
      run(frames, out_dir / std::string(to_string(e.weather)) / e.video_id);
    }
  }
  write_resolved_config(config, out_dir, "infer");
  return out_dir;
}

EvaluationSummary cmd_evaluate(const RunConfig& config, std::ostream& out) {
  const auto manifest = DatasetManifest::load(config.manifest_path());
  const auto pred = config.evaluate.predictions.empty() ? config.output_root / "predictions" : config.evaluate.predictions;
  auto summary = evaluate_directories(pred, manifest, config.evaluate.split, config.model.clip_length / 2);
  const auto dir = config.output_root / "eval";
  write_metrics_csv(dir / "metrics.csv", summary.frames);
  write_text(dir / "summary.json", summary.to_json().dump(2) + "\n");
  write_resolved_config(config, dir, "evaluate");
  out << summary.table() << "per-frame metrics: " << (dir / "metrics.csv").string() << "\n";
  return summary;
}

}  // namespace viws
