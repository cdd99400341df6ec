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

#include "dlgpd/experiments.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

#include "dlgpd/dataset.h"

namespace dlgpd::experiments {
namespace {

using nlohmann::json;

// Stable across platforms, unlike std::hash.
std::uint32_t name_id(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

enum SeedDomain : std::uint32_t {
  kTrainData = 1,
  kPoolData = 2,
  kTraining = 3,
  kEvidence = 4,
  kTrialInit = 5,
  kTrialPlanner = 6,
};

void say(const Progress& p, const std::string& msg) {
  if (p) p(msg);
}

std::string pad(int v, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

std::filesystem::path Layout::pool_dir(const std::string& variant, int pool) const {
  return root_ / "data" / "pools" / variant / ("pool_" + std::to_string(pool));
}

std::filesystem::path Layout::model_dir(int k) const {
  return root_ / "models" / ("model_" + std::to_string(k));
}

std::filesystem::path Layout::cell_dir(const std::string& experiment,
                                       const std::string& variant, int subset) const {
  return experiment_dir(experiment) / variant / std::to_string(subset);
}

// ---------------------------------------------------------------- data

void generate_datasets(const config::RunConfig& cfg, const Layout& layout,
                       const Progress& progress) {
  cfg.validate();
  data::RolloutSetSpec train;
  train.base_params = cfg.env;
  train.variant = env::Variant::original();
  train.init = cfg.data.train_init;
  train.count = cfg.data.train_rollouts;
  train.length = cfg.data.rollout_len;
  train.seed = cfg.derive_seed(kTrainData);
  train.render = cfg.render();
  say(progress, "collecting " + std::to_string(train.count) + " training rollouts");
  data::generate_rollout_set(layout.train_dir(), train);

  for (const auto& name : cfg.data.variants) {
    for (int p = 0; p < cfg.data.pools; ++p) {
      data::RolloutSetSpec pool = train;
      pool.variant = env::Variant::parse(name);
      pool.count = cfg.data.pool_size;
      pool.seed = cfg.derive_seed(kPoolData, name_id(name), static_cast<std::uint32_t>(p));
      say(progress, "collecting pool " + std::to_string(p) + " of " + name);
      data::generate_rollout_set(layout.pool_dir(name, p), pool);
    }
  }
  config::write_json(layout.root() / "data" / "config.json", cfg.to_json());
}

// ---------------------------------------------------------------- training

model::TrainResult train_model(const config::RunConfig& cfg, const Layout& layout, int k,
                               const Progress& progress) {
  cfg.validate();
  require(k >= 0 && k < cfg.models, "model index out of range");
  auto rollouts = data::load_rollouts(layout.train_dir(), cfg.data.train_rollouts);
  for (const auto& r : rollouts) {
    require(r.frames.front().size() == cfg.net_arch().image_size,
            "training images do not match model.arch; regenerate the data");
  }
  const data::TransitionSet dataset(rollouts);

  const auto dir = layout.model_dir(k);
  std::filesystem::create_directories(dir);
  json cfg_json = cfg.to_json();
  config::write_json(dir / "config.json", cfg_json);

  model::TrainConfig tc = cfg.train;
  tc.seed = cfg.derive_seed(kTraining, static_cast<std::uint32_t>(k));

  std::ofstream log(dir / "train_log.tsv", std::ios::trunc);
  if (!log) fail(ErrorKind::kIo, "cannot write training log in " + dir.string());
  log << "epoch\tloss\telbo\trecon\tentropy\ttransition\treward\tsnr\tlog_prior\tseconds\n";
  log << std::setprecision(17);

  model::TrainCallbacks cb;
  cb.on_epoch = [&](const model::EpochLog& e) {
    log << e.epoch << '\t' << e.loss << '\t' << e.elbo << '\t' << e.terms.recon << '\t'
        << e.terms.entropy << '\t' << e.terms.transition << '\t' << e.terms.reward << '\t'
        << e.snr << '\t' << e.log_prior << '\t' << e.seconds << '\n';
    log.flush();
    std::ostringstream os;
    os << "model " << k << " epoch " << e.epoch << "/" << tc.epochs << " loss "
       << e.loss << " elbo " << e.elbo << " (" << std::fixed << std::setprecision(1)
       << e.seconds << " s)";
    say(progress, os.str());
  };
  cb.on_checkpoint = [&](int epoch, const model::DlgpdParams<float>& params) {
    model::Checkpoint ckpt;
    ckpt.params = params;
    ckpt.norm = model::compute_norm_stats(params, dataset.rollouts());
    ckpt.epoch = epoch;
    ckpt.config_json = cfg_json.dump();
    model::save_checkpoint(dir / ("checkpoint_epoch_" + pad(epoch, 5) + ".ckpt"), ckpt);
    if (epoch == tc.epochs) model::save_checkpoint(dir / "model.ckpt", ckpt);
  };
  return model::train(dataset, tc, cb);
}

// ---------------------------------------------------------------- control

bool success(std::span<const double> rewards) {
  if (rewards.size() != static_cast<std::size_t>(kSuccessLength)) {
    fail(ErrorKind::kInvalidArgument,
         "success needs a " + std::to_string(kSuccessLength) + "-step reward sequence, got " +
             std::to_string(rewards.size()));
  }
  return std::all_of(rewards.end() - kSuccessWindow, rewards.end(),
                     [](double r) { return r > -1.0; });
}

json TrialRecord::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["variant"] = variant;
  j["evidence"] = evidence;
  j["subset"] = subset;
  j["model"] = model;
  j["pool"] = pool;
  j["trial"] = trial;
  j["index"] = index;
  j["seed"] = seed;
  j["init"] = {{"theta", init.theta}, {"theta_dot", init.theta_dot}};
  j["cumulative_reward"] = cumulative_reward;
  j["success"] = success;
  j["actions"] = trajectory.actions;
  j["rewards"] = trajectory.rewards;
  j["planned_returns"] = trajectory.planned_returns;
  json states = json::array();
  for (const auto& s : trajectory.states) states.push_back({s.theta, s.theta_dot});
  j["states"] = states;
  json latents = json::array();
  for (const auto& s : trajectory.latents) latents.push_back({s(0), s(1), s(2)});
  j["latents"] = latents;
  return j;
}

std::vector<TrialRecord> run_cell(const config::RunConfig& cfg, const Layout& layout,
                                  const std::string& experiment, const std::string& variant,
                                  const std::string& evidence_variant, int subset,
                                  const Progress& progress) {
  cfg.validate();
  require(subset >= 1 && subset <= cfg.data.pool_size, "subset size out of range");
  const env::PendulumParams params = env::make_variant(cfg.env, env::Variant::parse(variant));
  const std::string evidence = evidence_variant == variant ? "matching" : "mismatching";
  const auto dir = layout.cell_dir(experiment, variant, subset);
  std::filesystem::create_directories(dir);
  config::write_json(layout.experiment_dir(experiment) / "config.json", cfg.to_json());

  std::vector<TrialRecord> out;
  for (int m = 0; m < cfg.eval.models; ++m) {
    const model::Checkpoint ckpt = model::load_checkpoint(layout.checkpoint(m));
    require(ckpt.params.arch == cfg.net_arch(), "checkpoint architecture differs from model.arch");
    const std::uint64_t hash = ckpt.params.hash();
    for (int p = 0; p < cfg.eval.pools; ++p) {
      const auto rollouts = data::load_rollouts(layout.pool_dir(evidence_variant, p), subset);
      const model::ConditionedModel cm = model::condition(
          ckpt.params, ckpt.norm, rollouts,
          cfg.derive_seed(kEvidence, static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(p)));
      for (int t = 0; t < cfg.eval.trials; ++t) {
        TrialRecord rec;
        rec.experiment = experiment;
        rec.variant = variant;
        rec.evidence = evidence;
        rec.subset = subset;
        rec.model = m;
        rec.pool = p;
        rec.trial = t;
        rec.index = (m * cfg.eval.pools + p) * cfg.eval.trials + t;
        Rng init_rng = make_stream(cfg.derive_seed(kTrialInit, static_cast<std::uint32_t>(rec.index)));
        rec.init = cfg.eval.init.sample(init_rng);
        rec.seed = cfg.derive_seed(kTrialPlanner, static_cast<std::uint32_t>(rec.index),
                                   static_cast<std::uint32_t>(subset), name_id(evidence_variant));
        planner::CemConfig pc = cfg.planner;
        pc.seed = rec.seed;
        env::Pendulum pendulum(params, cfg.render());
        rec.trajectory = planner::mpc_run(pendulum, rec.init, cm, pc, cfg.eval.episode_len);
        rec.cumulative_reward = rec.trajectory.cumulative_reward();
        rec.success = cfg.eval.episode_len == kSuccessLength && success(rec.trajectory.rewards);
        config::write_json(dir / ("trial_" + std::to_string(rec.index) + ".json"), rec.to_json());
        std::ostringstream os;
        os << experiment << " " << variant << " subset " << subset << " trial " << rec.index
           << ": return " << std::fixed << std::setprecision(2) << rec.cumulative_reward
           << (rec.success ? " (success)" : "");
        say(progress, os.str());
        out.push_back(std::move(rec));
      }
      if (cm.params().hash() != hash) {
        fail(ErrorKind::kState, "model parameters changed during evaluation");
      }
    }
  }
  return out;
}

std::vector<TrialRecord> evaluate_control(const config::RunConfig& cfg, const Layout& layout,
                                          const std::string& variant, int subset,
                                          const Progress& progress) {
  auto trials = run_cell(cfg, layout, "control", variant, variant, subset, progress);
  write_summary(layout, "control");
  return trials;
}

TransferResult transfer_eval(const config::RunConfig& cfg, const Layout& layout,
                             const std::string& variant, std::span<const int> subsets,
                             const Progress& progress) {
  require(!subsets.empty(), "transfer needs at least one subset size");
  auto hash_models = [&] {
    std::uint64_t h = 1469598103934665603ull;
    for (int m = 0; m < cfg.eval.models; ++m) {
      h ^= model::load_checkpoint(layout.checkpoint(m)).params.hash();
      h *= 1099511628211ull;
    }
    return h;
  };
  TransferResult res;
  res.hash_before = hash_models();
  for (int subset : subsets) {
    run_cell(cfg, layout, "transfer-matching", variant, variant, subset, progress);
    run_cell(cfg, layout, "transfer-mismatching", variant, "original", subset, progress);
  }
  res.hash_after = hash_models();
  if (res.hash_after != res.hash_before) {
    fail(ErrorKind::kState, "model parameters changed during transfer evaluation");
  }
  for (const char* e : {"transfer-matching", "transfer-mismatching"}) {
    for (const auto& row : write_summary(layout, e)) {
      if (row.variant == variant &&
          std::find(subsets.begin(), subsets.end(), row.subset) != subsets.end()) {
        res.rows.push_back(row);
      }
    }
  }
  return res;
}

std::vector<CellSummary> write_summary(const Layout& layout, const std::string& experiment) {
  const auto root = layout.experiment_dir(experiment);
  std::map<std::tuple<std::string, std::string, int>, std::vector<std::pair<double, bool>>> cells;
  if (std::filesystem::exists(root)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
      const auto name = entry.path().filename().string();
      if (!entry.is_regular_file() || name.rfind("trial_", 0) != 0 ||
          entry.path().extension() != ".json") {
        continue;
      }
      const json j = config::read_json(entry.path());
      try {
        cells[{j.at("variant").get<std::string>(), j.at("evidence").get<std::string>(),
               j.at("subset").get<int>()}]
            .emplace_back(j.at("cumulative_reward").get<double>(), j.at("success").get<bool>());
      } catch (const json::exception& e) {
        fail(ErrorKind::kIo, "malformed trial file " + entry.path().string() + ": " + e.what());
      }
    }
  }
  std::vector<CellSummary> rows;
  for (auto& [key, vals] : cells) {
    // Sorted values make the aggregate independent of directory order.
    std::sort(vals.begin(), vals.end());
    CellSummary s;
    std::tie(s.variant, s.evidence, s.subset) = key;
    s.trials = static_cast<int>(vals.size());
    s.min = vals.front().first;
    s.max = vals.back().first;
    double sum = 0.0;
    int ok = 0;
    for (const auto& [r, succ] : vals) {
      sum += r;
      ok += succ ? 1 : 0;
    }
    s.mean = sum / s.trials;
    s.success_rate = static_cast<double>(ok) / s.trials;
    rows.push_back(s);
  }
  std::filesystem::create_directories(root);
  std::ofstream os(root / "summary.csv", std::ios::trunc);
  if (!os) fail(ErrorKind::kIo, "cannot write summary in " + root.string());
  os << "variant,evidence,subset,trials,mean_return,min_return,max_return,success_rate\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.variant << ',' << r.evidence << ',' << r.subset << ',' << r.trials << ',' << r.mean
       << ',' << r.min << ',' << r.max << ',' << r.success_rate << '\n';
  }
  return rows;
}

// ---------------------------------------------------------------- latents

std::vector<LatentRow> export_latents(const model::Checkpoint& ckpt,
                                      const std::vector<env::Rollout>& rollouts,
                                      const planner::Trajectory* trajectory) {
  for (const auto& r : rollouts) {
    require(!r.true_states.empty(), "latent export needs rollouts with true states");
  }
  const auto enc = model::encode_rollouts(ckpt.params, rollouts);
  std::vector<LatentRow> rows;
  rows.reserve(enc.size());
  std::size_t i = 0;
  for (const auto& r : rollouts) {
    for (int k = 0; k < r.num_observations(); ++k, ++i) {
      const env::PhysicalState& st = r.true_states[k + 1];
      rows.push_back({ckpt.norm.apply(enc[i].mean), env::wrap_angle(st.theta), st.theta_dot, 0});
    }
  }
  if (trajectory != nullptr) {
    const auto& lat = trajectory->latents;
    require(trajectory->states.size() >= lat.size() + 1,
            "trajectory states do not cover its latents");
    for (std::size_t t = 0; t < lat.size(); ++t) {
      const env::PhysicalState& st = trajectory->states[t + 1];
      rows.push_back({lat[t], env::wrap_angle(st.theta), st.theta_dot,
                      t + 1 == lat.size() ? 2 : 1});
    }
  }
  return rows;
}

void write_latents_tsv(const std::filesystem::path& path, const std::vector<LatentRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorKind::kIo, "cannot write " + path.string());
  os << "s1\ts2\ts3\ttheta\ttheta_dot\ttraj_flag\n";
  os << std::setprecision(9);
  for (const auto& r : rows) {
    os << r.s(0) << '\t' << r.s(1) << '\t' << r.s(2) << '\t' << r.theta << '\t'
       << r.theta_dot << '\t' << r.flag << '\n';
  }
  if (!os) fail(ErrorKind::kIo, "failed writing " + path.string());
}

planner::Trajectory read_trial_trajectory(const std::filesystem::path& path) {
  const json j = config::read_json(path);
  planner::Trajectory t;
  try {
    for (const auto& s : j.at("states")) t.states.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    for (const auto& s : j.at("latents")) {
      t.latents.emplace_back(s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>());
    }
    t.actions = j.at("actions").get<std::vector<double>>();
    t.rewards = j.at("rewards").get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kIo, "malformed trial file " + path.string() + ": " + e.what());
  }
  return t;
}

}  // namespace dlgpd::experiments
