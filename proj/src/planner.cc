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

#include "dlgpd/planner.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace dlgpd::planner {

Latent TrueDynamicsModel::to_latent(const env::PhysicalState& s) {
  return Latent(std::cos(s.theta), std::sin(s.theta), s.theta_dot);
}

env::PhysicalState TrueDynamicsModel::from_latent(const Latent& s) {
  return {std::atan2(s(1), s(0)), s(2)};
}

Latent TrueDynamicsModel::encode_mean(const env::Observation&) const {
  return to_latent(pendulum_.state());
}

StatePrediction TrueDynamicsModel::predict_next(const Latent& s, double a) const {
  const env::StepResult r = env::step(from_latent(s), a, pendulum_.params());
  return {to_latent(r.state), Latent::Zero()};
}

ScalarPrediction TrueDynamicsModel::predict_reward(const Latent& s, double a) const {
  return {env::step(from_latent(s), a, pendulum_.params()).reward, 0.0};
}

void CemConfig::validate() const {
  require(horizon >= 1, "CEM horizon must be at least 1");
  require(elites >= 2, "CEM needs at least 2 elites");
  require(population >= elites, "CEM population must not be smaller than the elite count");
  require(iterations >= 1, "CEM needs at least one iteration");
  require(std::isfinite(action_lo) && std::isfinite(action_hi) && action_lo < action_hi,
          "CEM action bounds must be finite and ordered");
  require(initial_stddev > 0.0 && min_stddev > 0.0, "CEM stddevs must be positive");
  require(reward_samples >= 1, "CEM needs at least one reward sample");
  require(threads >= 1, "thread count must be positive");
}

double evaluate_sequence(const LatentModel& model, const Latent& s0,
                         std::span<const double> actions, int reward_samples,
                         Rng& rng) {
  std::normal_distribution<double> normal;
  Latent mean = s0;
  Latent var = Latent::Zero();
  double total = 0.0;
  for (double a : actions) {
    const Latent sd = var.cwiseMax(0.0).cwiseSqrt();
    double r = 0.0;
    if (sd.isZero(0.0)) {
      // Every draw collapses onto the mean; keep the stream position anyway.
      for (int j = 0; j < 3 * reward_samples; ++j) normal(rng);
      r = model.predict_reward_mean(mean, a) * reward_samples;
    } else {
      for (int j = 0; j < reward_samples; ++j) {
        Latent z;
        for (int d = 0; d < 3; ++d) z(d) = normal(rng);
        r += model.predict_reward_mean(mean + sd.cwiseProduct(z), a);
      }
    }
    total += r / reward_samples;
    const StatePrediction next = model.predict_next(mean, a);
    mean = next.mean;
    var = next.variance;
  }
  return total;
}

namespace {

struct Candidate {
  std::vector<double> actions;
  double score = 0.0;
};

void score_range(const LatentModel& model, const Latent& s0, const CemConfig& cfg,
                 int iteration, const std::vector<double>& mean,
                 const std::vector<double>& stddev, std::vector<Candidate>& cands,
                 int begin, int end, int first_new) {
  std::normal_distribution<double> normal;
  for (int k = begin; k < end; ++k) {
    if (k < first_new) continue;
    Rng rng = make_stream(cfg.seed, static_cast<std::uint32_t>(iteration),
                          static_cast<std::uint32_t>(k));
    auto& c = cands[k];
    c.actions.resize(cfg.horizon);
    for (int h = 0; h < cfg.horizon; ++h) {
      c.actions[h] = std::clamp(mean[h] + stddev[h] * normal(rng), cfg.action_lo,
                                cfg.action_hi);
    }
    c.score = evaluate_sequence(model, s0, c.actions, cfg.reward_samples, rng);
  }
}

}  // namespace

Plan cem_plan(const LatentModel& model, const Latent& s0, const CemConfig& config,
              std::span<const double> initial_mean, CemTrace* trace) {
  config.validate();
  const int H = config.horizon;
  std::vector<double> mean(H, 0.0);
  if (!initial_mean.empty()) {
    require(static_cast<int>(initial_mean.size()) == H,
            "initial CEM mean must have horizon length");
    for (int h = 0; h < H; ++h) {
      mean[h] = std::clamp(initial_mean[h], config.action_lo, config.action_hi);
    }
  }
  std::vector<double> stddev(H, config.initial_stddev);
  std::vector<Candidate> elites;

  for (int it = 0; it < config.iterations; ++it) {
    // Carried-over elites occupy the first slots and keep their scores.
    std::vector<Candidate> cands(config.population);
    const int carried = static_cast<int>(elites.size());
    for (int k = 0; k < carried; ++k) cands[k] = std::move(elites[k]);

    const int workers = std::min(config.threads, config.population);
    if (workers <= 1) {
      score_range(model, s0, config, it, mean, stddev, cands, 0, config.population,
                  carried);
    } else {
      std::vector<std::thread> pool;
      const int chunk = (config.population + workers - 1) / workers;
      for (int w = 0; w < workers; ++w) {
        const int b = w * chunk;
        const int e = std::min(config.population, b + chunk);
        pool.emplace_back([&, b, e] {
          score_range(model, s0, config, it, mean, stddev, cands, b, e, carried);
        });
      }
      for (auto& t : pool) t.join();
    }

    std::vector<int> order(config.population);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return cands[a].score > cands[b].score; });
    const double best = cands[order.front()].score;
    const double worst = cands[order.back()].score;

    elites.clear();
    for (int e = 0; e < config.elites; ++e) elites.push_back(cands[order[e]]);

    if (best != worst) {
      for (int h = 0; h < H; ++h) {
        double m = 0.0;
        for (const auto& c : elites) m += c.actions[h];
        m /= config.elites;
        double v = 0.0;
        for (const auto& c : elites) v += (c.actions[h] - m) * (c.actions[h] - m);
        v /= config.elites;
        mean[h] = m;
        stddev[h] = std::max(std::sqrt(v), config.min_stddev);
      }
    }
    if (trace) {
      trace->best_elite_score.push_back(best);
      trace->means.push_back(mean);
    }
  }

  Plan plan;
  plan.actions = mean;
  Rng rng = make_stream(config.seed, static_cast<std::uint32_t>(config.iterations),
                        static_cast<std::uint32_t>(config.population));
  plan.expected_return =
      evaluate_sequence(model, s0, plan.actions, config.reward_samples, rng);
  return plan;
}

double Trajectory::cumulative_reward() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

Trajectory mpc_run(env::Pendulum& pendulum, const env::PhysicalState& init,
                   const LatentModel& model, const CemConfig& config,
                   int episode_len) {
  config.validate();
  require(episode_len >= 1, "episode length must be positive");
  Trajectory traj;
  pendulum.reset(init, 0.0);
  traj.frames.push_back(pendulum.previous_frame());
  traj.frames.push_back(pendulum.current_frame());
  traj.states.push_back(init);
  traj.states.push_back(pendulum.state());

  Rng seeds = make_stream(config.seed, 0x6d7063u);
  std::vector<double> warm;
  for (int t = 0; t < episode_len; ++t) {
    const Latent s = model.encode_mean(pendulum.observation());
    CemConfig step_cfg = config;
    step_cfg.seed = seeds();
    const Plan plan = cem_plan(model, s, step_cfg, warm);
    const double a = plan.actions.front();
    const env::StepResult res = pendulum.step(a);

    traj.latents.push_back(s);
    traj.actions.push_back(a);
    traj.rewards.push_back(res.reward);
    traj.planned_returns.push_back(plan.expected_return);
    traj.frames.push_back(pendulum.current_frame());
    traj.states.push_back(pendulum.state());

    if (config.warm_start) {
      warm.assign(plan.actions.begin() + 1, plan.actions.end());
      warm.push_back(0.0);
    }
  }
  return traj;
}

}  // namespace dlgpd::planner
