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

#include "viws/experiments.hpp"

#include <ostream>

#include "viws/objectives.hpp"

namespace viws {

OverfitResult overfit_clip(const ModelConfig& model_config, const TrainConfig& train_config, const torch::Tensor& frames,
                           const torch::Tensor& target, WeatherLabel label, int64_t max_steps, double target_psnr,
                           int64_t eval_every, std::ostream* log) {
  Trainer trainer(model_config, train_config);
  Batch batch;
  batch.frames = frames.unsqueeze(0).contiguous();
  batch.targets = target.unsqueeze(0).contiguous();
  batch.labels = torch::tensor({static_cast<int64_t>(label)}, torch::kInt64);

  const int64_t centre = frames.size(0) / 2;
  OverfitResult r;
  r.input_psnr = psnr(frames[centre], target);
  auto evaluate = [&] {
    torch::NoGradGuard no_grad;
    trainer.model()->eval();
    return psnr(trainer.model()->forward(batch.frames).restored[0], target);
  };
  for (int64_t s = 1; s <= max_steps; ++s) {
    r.smooth_l1.push_back(trainer.step(batch).smooth_l1);
    r.steps = s;
    if (s % eval_every == 0 || s == max_steps) {
      r.final_psnr = evaluate();
      r.psnr.push_back(r.final_psnr);
      if (log) *log << "overfit step " << s << " sL1 " << r.smooth_l1.back() << " psnr " << r.final_psnr << std::endl;
      if (r.final_psnr >= target_psnr) {
        r.steps_to_target = s;
        break;
      }
    }
  }
  return r;
}

EvaluationSummary desk_experiment(const DatasetManifest& manifest, const ModelConfig& model_config,
                                  const TrainConfig& train_config, std::ostream* log) {
  Trainer trainer(model_config, train_config);
  VideoCache cache(manifest, Split::train);
  const int64_t total = train_config.total_iterations();
  double running = 0.0;
  while (trainer.iteration() < total) {
    const auto r = trainer.step(trainer.next_batch(cache));
    running += r.smooth_l1;
    if (log && r.iteration % 250 == 0) {
      *log << "iter " << r.iteration << "/" << total << " mean sL1 " << running / 250 << " lambda " << r.lambda << std::endl;
      running = 0.0;
    }
  }
  return evaluate_model(trainer.model(), manifest, Split::test);
}

}  // namespace viws
