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
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dlgpd/experiments.h"
#include "test_util.h"

namespace dlgpd::experiments {
namespace {

config::RunConfig tiny_config() {
  return config::load(std::nullopt,
                      {"model.arch=tiny", "data.train_rollouts=3", "data.rollout_len=6",
                       "data.pools=1", "data.pool_size=2",
                       "data.variants=[\"original\",\"inverted-action\"]", "train.epochs=2",
                       "train.batch_size=8", "train.checkpoint_every=1", "train.models=1",
                       "planner.horizon=3", "planner.population=10", "planner.elites=2",
                       "planner.iterations=2", "planner.reward_samples=1", "eval.episode_len=4",
                       "eval.subset_sizes=[1,2]", "eval.models=1", "eval.pools=1",
                       "eval.trials=2"},
                      21);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

TEST(Success, StrictThresholdOverLastWindow) {
  std::vector<double> r(150, -5.0);
  for (int i = 125; i < 150; ++i) r[i] = -0.5;
  EXPECT_TRUE(success(r));
  r[125] = -1.0;
  EXPECT_FALSE(success(r));
  r[125] = -0.999;
  r[124] = -100.0;
  EXPECT_TRUE(success(r));
  EXPECT_THROW(success(std::vector<double>(149, 0.0)), Error);
}

TEST(LayoutTest, Paths) {
  const Layout l("/w");
  EXPECT_EQ(l.pool_dir("mass-1.5", 2), std::filesystem::path("/w/data/pools/mass-1.5/pool_2"));
  EXPECT_EQ(l.checkpoint(1), std::filesystem::path("/w/models/model_1/model.ckpt"));
  EXPECT_EQ(l.train_dir(), std::filesystem::path("/w/data/train"));
}

TEST(Pipeline, CollectTrainControlTransferExport) {
  testing::TempDir dir;
  const config::RunConfig cfg = tiny_config();
  const Layout layout(dir.path());

  generate_datasets(cfg, layout);
  EXPECT_EQ(data::read_manifest(layout.train_dir()).num_rollouts, 3);
  EXPECT_EQ(data::read_manifest(layout.pool_dir("inverted-action", 0)).variant, "inverted-action");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "data" / "config.json"));

  const model::TrainResult tr = train_model(cfg, layout, 0);
  EXPECT_EQ(tr.log.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(layout.checkpoint(0)));
  EXPECT_TRUE(std::filesystem::exists(layout.model_dir(0) / "train_log.tsv"));
  EXPECT_TRUE(std::filesystem::exists(layout.model_dir(0) / "config.json"));
  const std::uint64_t hash = model::load_checkpoint(layout.checkpoint(0)).params.hash();
  EXPECT_EQ(hash, tr.params.hash());

  const auto trials = evaluate_control(cfg, layout, "original", 2);
  ASSERT_EQ(trials.size(), 2u);
  EXPECT_EQ(trials[0].trajectory.rewards.size(), 4u);
  EXPECT_FALSE(trials[0].success);
  EXPECT_TRUE(std::filesystem::exists(layout.cell_dir("control", "original", 2) / "trial_1.json"));

  const std::vector<int> subsets{1, 2};
  const TransferResult res = transfer_eval(cfg, layout, "inverted-action", subsets);
  EXPECT_EQ(res.hash_before, res.hash_after);
  EXPECT_EQ(res.rows.size(), 4u);
  EXPECT_EQ(model::load_checkpoint(layout.checkpoint(0)).params.hash(), hash);
  const std::string csv = slurp(layout.experiment_dir("transfer-mismatching") / "summary.csv");
  EXPECT_NE(csv.find("inverted-action,mismatching,2,2,"), std::string::npos);

  // Trials are reproducible from the stored configuration.
  const auto again = evaluate_control(cfg, layout, "original", 2);
  EXPECT_EQ(again[1].trajectory.actions, trials[1].trajectory.actions);

  const model::Checkpoint ckpt = model::load_checkpoint(layout.checkpoint(0));
  const auto rollouts = data::load_rollouts(layout.train_dir(), 1);
  const planner::Trajectory traj =
      read_trial_trajectory(layout.cell_dir("control", "original", 2) / "trial_0.json");
  const auto rows = export_latents(ckpt, rollouts, &traj);
  // 7 observations of the rollout, then 4 planning steps, the last flagged 2.
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0].flag, 0);
  EXPECT_EQ(rows[7].flag, 1);
  EXPECT_EQ(rows[10].flag, 2);
  EXPECT_EQ(rows[7].theta, env::wrap_angle(traj.states[1].theta));
  write_latents_tsv(dir.path() / "l.tsv", rows);
  const std::string tsv = slurp(dir.path() / "l.tsv");
  EXPECT_EQ(tsv.rfind("s1\ts2\ts3\ttheta\ttheta_dot\ttraj_flag\n", 0), 0u);
}

TEST(Datasets, SameSeedSameBytes) {
  testing::TempDir a, b;
  const config::RunConfig cfg = tiny_config();
  generate_datasets(cfg, Layout(a.path()));
  generate_datasets(cfg, Layout(b.path()));
  for (const auto& rel : {"data/train/rollout_00002.bin", "data/train/manifest.json",
                          "data/pools/inverted-action/pool_0/rollout_00001.bin"}) {
    EXPECT_EQ(slurp(a.path() / rel), slurp(b.path() / rel)) << rel;
  }
}

TEST(Summary, IndependentOfTrialOrder) {
  testing::TempDir a, b;
  auto write = [](const Layout& l, int index, double ret) {
    TrialRecord r;
    r.experiment = "control";
    r.variant = "original";
    r.evidence = "matching";
    r.subset = 10;
    r.index = index;
    r.cumulative_reward = ret;
    config::write_json(l.cell_dir("control", "original", 10) /
                           ("trial_" + std::to_string(index) + ".json"),
                       r.to_json());
  };
  const Layout la(a.path()), lb(b.path());
  write(la, 0, -100);
  write(la, 1, -300);
  write(lb, 1, -300);
  write(lb, 0, -100);
  write_summary(la, "control");
  write_summary(lb, "control");
  const std::string sa = slurp(la.experiment_dir("control") / "summary.csv");
  EXPECT_EQ(sa, slurp(lb.experiment_dir("control") / "summary.csv"));
  EXPECT_NE(sa.find("original,matching,10,2,-200"), std::string::npos);
}

}  // namespace
}  // namespace dlgpd::experiments
