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
#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace viws::testing {

namespace fs = std::filesystem;

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("viws_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct GradCheck {
  bool ok = true;
  int64_t checked = 0;
  double worst_rel = 0.0;
  std::string report;
};

/// Central finite differences against autograd for `samples` elements of
/// every tensor in `params` (the largest-gradient elements first, then
/// random ones). A mismatch is |a - n| > atol + rtol * max(|a|, |n|).
inline GradCheck grad_check(const std::function<torch::Tensor()>& loss_fn, const std::vector<torch::Tensor>& params,
                            int64_t samples = 6, double eps = 1e-5, double rtol = 1e-3, double atol = 1e-9,
                            uint64_t seed = 0) {
  for (auto p : params) {
    if (p.grad().defined()) p.mutable_grad() = torch::Tensor();
  }
  auto loss = loss_fn();
  loss.backward();
  std::vector<torch::Tensor> analytic;
  for (const auto& p : params) analytic.push_back(p.grad().defined() ? p.grad().clone() : torch::zeros_like(p));

  GradCheck r;
  std::mt19937_64 rng(seed);
  torch::NoGradGuard no_grad;
  std::ostringstream os;
  for (size_t k = 0; k < params.size(); ++k) {
    auto flat = params[k].view(-1);
    auto g = analytic[k].reshape(-1);
    const int64_t n = flat.numel();
    std::vector<int64_t> idx;
    auto order = g.abs().argsort(0, /*descending=*/true);
    for (int64_t i = 0; i < std::min<int64_t>(samples / 2 + 1, n); ++i) idx.push_back(order[i].item<int64_t>());
    std::uniform_int_distribution<int64_t> pick(0, n - 1);
    while (static_cast<int64_t>(idx.size()) < std::min<int64_t>(samples, n)) idx.push_back(pick(rng));
    for (const int64_t i : idx) {
      const double orig = flat[i].item<double>();
      flat[i] = orig + eps;
      const double up = loss_fn().item<double>();
      flat[i] = orig - eps;
      const double down = loss_fn().item<double>();
      flat[i] = orig;
      const double numeric = (up - down) / (2 * eps);
      const double a = g[i].item<double>();
      const double err = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double rel = scale > 0 ? err / scale : 0.0;
      ++r.checked;
      if (err > atol + rtol * scale) {
        r.ok = false;
        os << "param " << k << " elem " << i << ": autograd " << a << " vs fd " << numeric << "\n";
      }
      if (err > atol) r.worst_rel = std::max(r.worst_rel, rel);
    }
  }
  r.report = os.str();
  return r;
}

/// Random weights of a fixed seed for a scalar readout of `x`.
inline torch::Tensor readout(const torch::Tensor& x, uint64_t seed = 7) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  auto w = torch::randn(x.sizes(), gen, x.options().requires_grad(false));
  return (x * w).sum();
}

}  // namespace viws::testing
