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

#ifndef DLGPD_DATASET_H_
#define DLGPD_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlgpd/env.h"

namespace dlgpd::data {

inline constexpr int kFormatVersion = 1;

// Rollout record file (little-endian):
//   char[8]  magic "DLGPDRL1"
//   u32      format version
//   u32      T, number of transitions
//   u32      S, image size
//   u32      channels (3)
//   u32      1 if true states follow, else 0
//   u32      reserved (0)
//   f64 x 2  initial theta, theta_dot
//   u8       frames, (T + 2) x S x S x 3, frame-major, row-major, RGB interleaved
//   f64      actions, T + 1
//   f64      rewards, T + 1
//   f64      true states, (T + 2) x (theta, theta_dot), when flagged
void write_rollout(const std::filesystem::path& path, const env::Rollout& rollout);
env::Rollout read_rollout(const std::filesystem::path& path);

std::string rollout_filename(int index);

// Everything needed to (re)generate a directory of rollouts. Rollout i is
// drawn from its own stream make_stream(seed, i), so sets can be resumed or
// extended without changing existing files.
struct RolloutSetSpec {
  env::PendulumParams base_params;
  env::Variant variant;
  env::UniformInit init;
  int count = 1;
  int length = 28;
  std::uint64_t seed = 0;
  env::RenderOptions render;
};

// Writes manifest.json and one record per rollout. Existing, readable
// records with the expected length are kept.
void generate_rollout_set(const std::filesystem::path& dir, const RolloutSetSpec& spec);

struct Manifest {
  int format_version = kFormatVersion;
  std::string variant;
  env::PendulumParams params;
  env::UniformInit init;
  int num_rollouts = 0;
  int rollout_length = 0;
  int image_size = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> files;
};

Manifest read_manifest(const std::filesystem::path& dir);

// Loads the first `limit` rollouts in manifest order (all when negative).
std::vector<env::Rollout> load_rollouts(const std::filesystem::path& dir,
                                        int limit = -1);

// Flat index over all transitions of a rollout collection.
class TransitionSet {
 public:
  struct Ref {
    int rollout;
    int t;
  };

  explicit TransitionSet(std::vector<env::Rollout> rollouts);

  int size() const { return static_cast<int>(refs_.size()); }
  const Ref& ref(int i) const { return refs_[i]; }
  const std::vector<env::Rollout>& rollouts() const { return rollouts_; }
  double min_reward() const { return min_reward_; }
  double action(int i) const;
  double reward(int i) const;

 private:
  std::vector<env::Rollout> rollouts_;
  std::vector<Ref> refs_;
  double min_reward_ = 0.0;
};

}  // namespace dlgpd::data

#endif  // DLGPD_DATASET_H_
