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

#ifndef DLGPD_PLANNER_H_
#define DLGPD_PLANNER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "dlgpd/common.h"
#include "dlgpd/env.h"

namespace dlgpd::planner {

struct StatePrediction {
  Latent mean = Latent::Zero();
  Latent variance = Latent::Zero();
};

struct ScalarPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

// What the planner needs from a dynamics model. Implementations must be
// safe for concurrent const use.
class LatentModel {
 public:
  virtual ~LatentModel() = default;

  // Mean state encoding of an observation.
  virtual Latent encode_mean(const env::Observation& obs) const = 0;
  virtual StatePrediction predict_next(const Latent& s, double a) const = 0;
  virtual ScalarPrediction predict_reward(const Latent& s, double a) const = 0;
  virtual double predict_reward_mean(const Latent& s, double a) const {
    return predict_reward(s, a).mean;
  }
};

// Exposes the simulator's own dynamics and reward through the LatentModel
// interface, with the latent (cos theta, sin theta, theta_dot). encode_mean
// reads the true state of the attached simulator instead of the pixels.
class TrueDynamicsModel : public LatentModel {
 public:
  explicit TrueDynamicsModel(const env::Pendulum& pendulum)
      : pendulum_(pendulum) {}

  static Latent to_latent(const env::PhysicalState& s);
  static env::PhysicalState from_latent(const Latent& s);

  Latent encode_mean(const env::Observation& obs) const override;
  StatePrediction predict_next(const Latent& s, double a) const override;
  ScalarPrediction predict_reward(const Latent& s, double a) const override;

 private:
  const env::Pendulum& pendulum_;
};

struct CemConfig {
  int horizon = 20;
  int population = 500;
  int elites = 50;
  int iterations = 8;
  double initial_stddev = 1.0;
  double min_stddev = 1e-3;
  double action_lo = -env::kActionBound;
  double action_hi = env::kActionBound;
  int reward_samples = 5;
  bool warm_start = true;
  std::uint64_t seed = 0;
  // Worker threads for candidate scoring; results do not depend on it.
  int threads = 1;

  void validate() const;
};

struct Plan {
  std::vector<double> actions;
  double expected_return = 0.0;
};

// Propagates the predicted mean from s0. At every step the reward is the
// average reward-model mean over `reward_samples` draws from the marginal
// N(mean_k, diag(var_k)); var_0 = 0. Draws come from rng in step order,
// three standard normals per sample.
double evaluate_sequence(const LatentModel& model, const Latent& s0,
                         std::span<const double> actions, int reward_samples,
                         Rng& rng);

// Per-iteration statistics, mainly for tests.
struct CemTrace {
  std::vector<double> best_elite_score;
  std::vector<std::vector<double>> means;
};

// Cross-entropy search over action sequences. Candidate k of iteration i is
// scored with its own stream make_stream(seed, i, k), so scores do not
// depend on evaluation order. The elites of the previous iteration are
// carried into the next population.
Plan cem_plan(const LatentModel& model, const Latent& s0, const CemConfig& config,
              std::span<const double> initial_mean = {}, CemTrace* trace = nullptr);

struct Trajectory {
  std::vector<env::Frame> frames;           // episode_len + 2
  std::vector<env::PhysicalState> states;   // episode_len + 2
  std::vector<double> actions;              // episode_len
  std::vector<double> rewards;              // episode_len
  std::vector<Latent> latents;              // state encoding used at each step
  std::vector<double> planned_returns;      // episode_len

  double cumulative_reward() const;
};

// Receding-horizon control: encode the latest observation, plan, execute the
// first action, shift the plan as the next initial mean. The first
// observation is bootstrapped with a zero action that is not counted.
Trajectory mpc_run(env::Pendulum& pendulum, const env::PhysicalState& init,
                   const LatentModel& model, const CemConfig& config,
                   int episode_len = 150);

}  // namespace dlgpd::planner

#endif  // DLGPD_PLANNER_H_
