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

#ifndef DLGPD_EXPERIMENTS_H_
#define DLGPD_EXPERIMENTS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlgpd/config.h"
#include "dlgpd/model.h"
#include "dlgpd/planner.h"

namespace dlgpd::experiments {

// Directory layout below the workspace root:
//   data/train/                          training rollouts (original variant)
//   data/pools/<variant>/pool_<p>/       evidence pools
//   models/model_<k>/model.ckpt          trained models
//   results/<experiment>/<variant>/<subset>/trial_<k>.json
//   results/<experiment>/summary.csv
class Layout {
 public:
  explicit Layout(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path train_dir() const { return root_ / "data" / "train"; }
  std::filesystem::path pool_dir(const std::string& variant, int pool) const;
  std::filesystem::path model_dir(int k) const;
  std::filesystem::path checkpoint(int k) const { return model_dir(k) / "model.ckpt"; }
  std::filesystem::path experiment_dir(const std::string& experiment) const {
    return root_ / "results" / experiment;
  }
  std::filesystem::path cell_dir(const std::string& experiment, const std::string& variant,
                                 int subset) const;

 private:
  std::filesystem::path root_;
};

using Progress = std::function<void(const std::string&)>;

// Training set plus pools for every configured variant. Existing records are
// kept, so interrupted runs resume.
void generate_datasets(const config::RunConfig& cfg, const Layout& layout,
                       const Progress& progress = {});

// Trains model k on the training set and writes its checkpoint, periodic
// checkpoints and train_log.tsv into the model directory.
model::TrainResult train_model(const config::RunConfig& cfg, const Layout& layout, int k,
                               const Progress& progress = {});

// All of the last 25 rewards of a 150-step episode are strictly above -1.
bool success(std::span<const double> rewards);

inline constexpr int kSuccessWindow = 25;
inline constexpr int kSuccessLength = 150;

struct TrialRecord {
  std::string experiment;
  std::string variant;
  std::string evidence;  // "matching" or "mismatching"
  int subset = 0;
  int model = 0;
  int pool = 0;
  int trial = 0;
  int index = 0;
  std::uint64_t seed = 0;
  env::PhysicalState init;
  double cumulative_reward = 0.0;
  bool success = false;
  planner::Trajectory trajectory;

  nlohmann::json to_json() const;
};

struct CellSummary {
  std::string variant;
  std::string evidence;
  int subset = 0;
  int trials = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double success_rate = 0.0;
};

// Conditions each model on the first `subset` rollouts of each evidence pool
// and runs models x pools x trials MPC episodes in the variant environment.
// Transition and reward evidence come from pools of `evidence_variant`.
std::vector<TrialRecord> run_cell(const config::RunConfig& cfg, const Layout& layout,
                                  const std::string& experiment, const std::string& variant,
                                  const std::string& evidence_variant, int subset,
                                  const Progress& progress = {});

// Control in the named variant with matching evidence; writes trial files and
// refreshes the experiment summary.
std::vector<TrialRecord> evaluate_control(const config::RunConfig& cfg, const Layout& layout,
                                          const std::string& variant, int subset,
                                          const Progress& progress = {});

struct TransferResult {
  std::vector<CellSummary> rows;
  std::uint64_t hash_before = 0;
  std::uint64_t hash_after = 0;
};

// Evidence swap without retraining: for each subset size, control in the
// variant with evidence from the variant (matching) and from the original
// environment (mismatching). Fails if any model parameter changes.
TransferResult transfer_eval(const config::RunConfig& cfg, const Layout& layout,
                             const std::string& variant, std::span<const int> subsets,
                             const Progress& progress = {});

// Aggregates every trial file below the experiment directory into
// summary.csv; the result does not depend on the order trials were run.
std::vector<CellSummary> write_summary(const Layout& layout, const std::string& experiment);

// Rows s1 s2 s3 theta theta_dot traj_flag: one per observation of the
// rollouts (flag 0), then the latents of an optional trajectory (flag 1, the
// final state 2). theta is wrapped into (-pi, pi].
struct LatentRow {
  Latent s;
  double theta = 0.0;
  double theta_dot = 0.0;
  int flag = 0;
};

std::vector<LatentRow> export_latents(const model::Checkpoint& ckpt,
                                      const std::vector<env::Rollout>& rollouts,
                                      const planner::Trajectory* trajectory = nullptr);
void write_latents_tsv(const std::filesystem::path& path, const std::vector<LatentRow>& rows);

// Reads the states and latents of a trial file back into a trajectory.
planner::Trajectory read_trial_trajectory(const std::filesystem::path& path);

}  // namespace dlgpd::experiments

#endif  // DLGPD_EXPERIMENTS_H_
