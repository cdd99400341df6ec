// Copyright 2026 The DLGPD Authors
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

#ifndef DLGPD_CONFIG_H_
#define DLGPD_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlgpd/env.h"
#include "dlgpd/model.h"
#include "dlgpd/planner.h"

namespace dlgpd::config {

// The full default configuration, equal to configs/paper.json.
nlohmann::json defaults();

// Recursively overlays `overlay` onto `base`. Keys that do not exist in base
// are rejected with the offending path.
nlohmann::json merge_strict(const nlohmann::json& base, const nlohmann::json& overlay);

// Applies "a.b.c=value". The value is parsed as JSON when possible and taken
// as a string otherwise. The key must already exist.
void apply_assignment(nlohmann::json& cfg, const std::string& assignment);

struct DataConfig {
  int train_rollouts = 500;
  int rollout_len = 28;
  int pools = 3;
  int pool_size = 200;
  std::vector<std::string> variants{"original", "inverted-action", "mass-0.2", "mass-1.5"};
  env::UniformInit train_init = env::UniformInit::training();
};

struct EvalConfig {
  int episode_len = 150;
  std::vector<int> subset_sizes{10, 20, 50, 100, 200};
  // Cells are models x pools x trials.
  int models = 3;
  int pools = 3;
  int trials = 3;
  env::UniformInit init = env::UniformInit::swing_up();
};

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  env::PendulumParams env;
  DataConfig data;
  // "standard" (64x64 images) or "tiny" (8x8, for smoke runs).
  std::string arch = "standard";
  model::TrainConfig train;
  int models = 3;
  planner::CemConfig planner;
  EvalConfig eval;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  nets::NetArch net_arch() const;
  env::RenderOptions render() const;
  // Seeds of independent parts of a run, derived from the master seed.
  std::uint64_t derive_seed(std::uint32_t a, std::uint32_t b = 0, std::uint32_t c = 0,
                            std::uint32_t d = 0) const;
};

// defaults() <- config file (if any) <- assignments <- seed override.
RunConfig load(const std::optional<std::filesystem::path>& file,
               const std::vector<std::string>& assignments,
               std::optional<std::uint64_t> seed = std::nullopt);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace dlgpd::config

#endif  // DLGPD_CONFIG_H_
