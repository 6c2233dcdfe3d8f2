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

// Desk-scale experiments outside the CLI config flow:
//   viws_experiment overfit --manifest m.json --weather rain --steps 2000
//   viws_experiment desk --manifest m.json --steps 5000 --variant no_adversarial

#include <CLI11.hpp>

#include <iostream>

#include "viws/errors.hpp"
#include "viws/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"desk-scale overfit / restoration / ablation runs"};
  app.require_subcommand(1);
  std::string manifest_path, weather = "rain", preset = "desk", variant = "full";
  int64_t steps = 2000, seed = 0, video = 0, centre = 2, per_epoch = 100;
  int64_t warmup = -1;
  double lr = -1.0, target = 30.0, gamma1 = -1.0, gamma2 = -1.0;
  int64_t eval_every = 50;

  auto common = [&](CLI::App* s) {
    s->add_option("--manifest", manifest_path)->required();
    s->add_option("--steps", steps);
    s->add_option("--seed", seed);
    s->add_option("--lr", lr);
    s->add_option("--preset", preset);
    s->add_option("--variant", variant);
    s->add_option("--gamma1", gamma1);
    s->add_option("--gamma2", gamma2);
    s->add_option("--warmup", warmup);
  };
  auto* overfit = app.add_subcommand("overfit", "fit one training clip");
  common(overfit);
  overfit->add_option("--weather", weather);
  overfit->add_option("--video", video, "index among the weather's training videos");
  overfit->add_option("--centre", centre);
  overfit->add_option("--target", target);
  overfit->add_option("--eval-every", eval_every);
  auto* desk = app.add_subcommand("desk", "train on the mixed set, score the test split");
  common(desk);
  desk->add_option("--steps-per-epoch", per_epoch);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto manifest = viws::DatasetManifest::load(manifest_path);
    auto model = viws::ModelConfig::preset(preset).with_variant(variant);
    model.init_seed = static_cast<uint64_t>(seed);
    auto train = viws::TrainConfig::desk();
    train.seed = static_cast<uint64_t>(seed);
    train.n = model.clip_length / 2;
    if (lr > 0) train.lr0 = lr;
    if (warmup >= 0) train.warmup_iters = warmup;
    if (gamma1 >= 0) train.loss.gamma1 = gamma1;
    if (gamma2 >= 0) train.loss.gamma2 = gamma2;

    if (*overfit) {
      const viws::VideoCache cache(manifest, viws::Split::train);
      const auto videos = cache.of_weather(viws::parse_weather(weather));
      if (video < 0 || video >= static_cast<int64_t>(videos.size())) throw viws::RangeError("no such video");
      const auto* v = videos[static_cast<size_t>(video)];
      const int64_t n = train.n;
      auto frames = v->degraded.slice(0, centre - n, centre + n + 1).permute({0, 3, 1, 2});
      auto target_frame = v->clean[centre].permute({2, 0, 1});
      train.epochs = 1;
      train.steps_per_epoch = steps;
      const auto r = viws::overfit_clip(model, train, frames, target_frame, v->entry.weather, steps, target, eval_every, &std::cout);
      std::cout << "input " << r.input_psnr << " dB, final " << r.final_psnr << " dB, steps_to_target "
                << r.steps_to_target << "\n";
    } else {
      train.steps_per_epoch = per_epoch;
      train.epochs = (steps + per_epoch - 1) / per_epoch;
      const auto s = viws::desk_experiment(manifest, model, train, &std::cout);
      std::cout << s.table();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
