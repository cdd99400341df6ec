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

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dlgpd/dataset.h"
#include "test_util.h"

namespace dlgpd::data {
namespace {

env::Rollout small_rollout(std::uint64_t seed, int length = 5) {
  Rng rng(seed);
  env::RenderOptions ro;
  ro.image_size = 16;
  return env::collect_rollout({}, env::UniformInit::training(), env::uniform_random_policy(),
                              length, rng, ro);
}

TEST(Record, RoundTripIsExact) {
  testing::TempDir dir;
  const env::Rollout r = small_rollout(1);
  write_rollout(dir.path() / "r.bin", r);
  const env::Rollout back = read_rollout(dir.path() / "r.bin");
  EXPECT_EQ(back.frames, r.frames);
  EXPECT_EQ(back.actions, r.actions);
  EXPECT_EQ(back.rewards, r.rewards);
  EXPECT_EQ(back.init_state.theta, r.init_state.theta);
  ASSERT_EQ(back.true_states.size(), r.true_states.size());
  EXPECT_EQ(back.true_states.back().theta_dot, r.true_states.back().theta_dot);
}

TEST(Record, FileSizeMatchesLayout) {
  testing::TempDir dir;
  const env::Rollout r = small_rollout(2, 4);
  write_rollout(dir.path() / "r.bin", r);
  const std::size_t header = 8 + 6 * 4 + 2 * 8;
  const std::size_t frames = 6 * 16 * 16 * 3;
  const std::size_t expected = header + frames + 2 * 5 * 8 + 6 * 2 * 8;
  EXPECT_EQ(std::filesystem::file_size(dir.path() / "r.bin"), expected);
}

TEST(Record, TruncatedOrCorruptFilesRejected) {
  testing::TempDir dir;
  const auto p = dir.path() / "r.bin";
  write_rollout(p, small_rollout(3));
  std::filesystem::resize_file(p, std::filesystem::file_size(p) - 1);
  EXPECT_THROW(read_rollout(p), Error);
  {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os << "NOTAROLLOUTFILE";
  }
  EXPECT_THROW(read_rollout(p), Error);
  EXPECT_THROW(read_rollout(dir.path() / "missing.bin"), Error);
}

TEST(RolloutSet, ManifestAndDeterministicResume) {
  testing::TempDir dir;
  RolloutSetSpec spec;
  spec.count = 3;
  spec.length = 4;
  spec.seed = 9;
  spec.render.image_size = 16;
  generate_rollout_set(dir.path(), spec);
  const Manifest m = read_manifest(dir.path());
  EXPECT_EQ(m.num_rollouts, 3);
  EXPECT_EQ(m.rollout_length, 4);
  EXPECT_EQ(m.files.size(), 3u);
  EXPECT_EQ(m.files[1], rollout_filename(1));
  const auto first = load_rollouts(dir.path());

  // Extending the set leaves the existing records unchanged.
  std::filesystem::remove(dir.path() / rollout_filename(1));
  spec.count = 4;
  generate_rollout_set(dir.path(), spec);
  const auto second = load_rollouts(dir.path());
  ASSERT_EQ(second.size(), 4u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(second[i].frames, first[i].frames);
  EXPECT_EQ(load_rollouts(dir.path(), 2).size(), 2u);
  EXPECT_THROW(load_rollouts(dir.path(), 5), Error);
}

TEST(TransitionSet, IndexesEveryTransition) {
  std::vector<env::Rollout> rs{small_rollout(4, 3), small_rollout(5, 2)};
  const TransitionSet ts(rs);
  EXPECT_EQ(ts.size(), 5);
  EXPECT_EQ(ts.ref(3).rollout, 1);
  EXPECT_EQ(ts.ref(3).t, 0);
  EXPECT_EQ(ts.action(3), rs[1].actions[1]);
  EXPECT_EQ(ts.reward(4), rs[1].rewards[2]);
  double lo = 0.0;
  for (const auto& r : rs) {
    for (int t = 0; t < r.num_transitions(); ++t) lo = std::min(lo, r.transition_reward(t));
  }
  EXPECT_EQ(ts.min_reward(), lo);
}

}  // namespace
}  // namespace dlgpd::data
