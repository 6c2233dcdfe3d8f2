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

// viws: synthesize | train | infer | evaluate
//
// Exit codes: 0 ok, 1 user error (bad config, missing files, bad input),
// 2 internal error.

#include <CLI11.hpp>

#include <iostream>

#include "viws/commands.hpp"
#include "viws/errors.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Video adverse-weather removal: dataset synthesis, training, inference and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  bool resume = false;
  std::string checkpoint;
  int64_t max_steps = 0;

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "run config (JSON)")->required(); };
  auto* synth = app.add_subcommand("synthesize", "build the paired weather dataset");
  add_config(synth);
  auto* train = app.add_subcommand("train", "train on the mixed-weather training split");
  add_config(train);
  train->add_flag("--resume", resume, "continue from the last (or given) checkpoint");
  train->add_option("--checkpoint", checkpoint, "checkpoint to resume from");
  train->add_option("--max-steps", max_steps, "stop after this many steps");
  auto* infer = app.add_subcommand("infer", "restore a frame directory or the test split");
  add_config(infer);
  infer->add_option("--checkpoint", checkpoint, "model checkpoint (default: best)");
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against clean frames");
  add_config(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "unused; accepted for symmetry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto config = viws::RunConfig::load(config_path);
  std::optional<std::filesystem::path> ckpt;
  if (!checkpoint.empty()) ckpt = checkpoint;

  if (*synth) {
    viws::cmd_synthesize(config, std::cout);
  } else if (*train) {
    viws::cmd_train(config, {resume, ckpt, max_steps}, std::cout);
  } else if (*infer) {
    viws::cmd_infer(config, ckpt, std::cout);
  } else if (*evaluate) {
    viws::cmd_evaluate(config, std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const viws::UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
