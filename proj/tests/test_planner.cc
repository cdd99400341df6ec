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

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "dlgpd/experiments.h"
#include "dlgpd/planner.h"

namespace dlgpd::planner {
namespace {

// s' = s + a e1, reward -(s1 - 1)^2 - 0.01 a^2, optional constant variance.
class PointModel : public LatentModel {
 public:
  explicit PointModel(double var = 0.0) : var_(var) {}
  Latent encode_mean(const env::Observation&) const override { return Latent::Zero(); }
  StatePrediction predict_next(const Latent& s, double a) const override {
    StatePrediction p;
    p.mean = s;
    p.mean(0) += a;
    p.variance = Latent::Constant(var_);
    return p;
  }
  ScalarPrediction predict_reward(const Latent& s, double a) const override {
    return {-(s(0) - 1.0) * (s(0) - 1.0) - 0.01 * a * a, 0.0};
  }

 private:
  double var_;
};

TEST(EvaluateSequence, DeterministicModelSumsRewards) {
  const PointModel m;
  const std::vector<double> actions{0.5, 0.5, 0.0};
  Rng rng(1);
  const double r = evaluate_sequence(m, Latent::Zero(), actions, 5, rng);
  const double expected = -(1.0 + 0.0025) - (0.25 + 0.0025) - 0.0;
  EXPECT_NEAR(r, expected, 1e-12);
}

TEST(EvaluateSequence, ConsumesSameDrawsRegardlessOfVariance) {
  const PointModel a(0.0), b(0.3);
  const std::vector<double> actions{0.1, 0.2};
  Rng ra(5), rb(5);
  evaluate_sequence(a, Latent::Zero(), actions, 3, ra);
  evaluate_sequence(b, Latent::Zero(), actions, 3, rb);
  EXPECT_EQ(ra(), rb());
}

TEST(Cem, FindsTheTargetOnAPointModel) {
  const PointModel m;
  CemConfig c;
  c.horizon = 5;
  c.population = 200;
  c.elites = 20;
  c.iterations = 6;
  c.seed = 3;
  CemTrace trace;
  const Plan p = cem_plan(m, Latent::Zero(), c, {}, &trace);
  ASSERT_EQ(p.actions.size(), 5u);
  EXPECT_NEAR(p.actions[0], 1.0, 0.25);
  EXPECT_GT(p.expected_return, -1.5);
  ASSERT_EQ(trace.best_elite_score.size(), 6u);
  // Elites are carried over, so the best score never gets worse.
  for (std::size_t i = 1; i < trace.best_elite_score.size(); ++i) {
    EXPECT_GE(trace.best_elite_score[i], trace.best_elite_score[i - 1]);
  }
}

TEST(Cem, ActionsStayInBounds) {
  const PointModel m;
  CemConfig c;
  c.horizon = 4;
  c.population = 50;
  c.elites = 5;
  c.iterations = 3;
  c.action_lo = -0.3;
  c.action_hi = 0.3;
  const Plan p = cem_plan(m, Latent::Zero(), c);
  for (double a : p.actions) {
    EXPECT_GE(a, -0.3);
    EXPECT_LE(a, 0.3);
  }
}

TEST(Cem, ThreadCountDoesNotChangeResult) {
  const PointModel m(0.05);
  CemConfig c;
  c.horizon = 6;
  c.population = 64;
  c.elites = 8;
  c.iterations = 3;
  c.seed = 11;
  const Plan one = cem_plan(m, Latent::Zero(), c);
  c.threads = 3;
  const Plan three = cem_plan(m, Latent::Zero(), c);
  EXPECT_EQ(one.actions, three.actions);
  EXPECT_EQ(one.expected_return, three.expected_return);
}

TEST(Cem, ConfigValidation) {
  CemConfig c;
  c.elites = c.population + 1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.horizon = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.action_lo = 1.0;
  c.action_hi = -1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Cem, RejectsWrongInitialMeanLength) {
  const PointModel m;
  CemConfig c;
  c.horizon = 4;
  const std::vector<double> mean{0.0, 0.0};
  EXPECT_THROW(cem_plan(m, Latent::Zero(), c, mean), Error);
}

TEST(TrueDynamics, LatentRoundTripAndPrediction) {
  env::Pendulum p;
  const TrueDynamicsModel m(p);
  const env::PhysicalState s{0.7, -1.1};
  const Latent z = TrueDynamicsModel::to_latent(s);
  EXPECT_NEAR(z(0), std::cos(0.7), 1e-15);
  const env::PhysicalState back = TrueDynamicsModel::from_latent(z);
  EXPECT_NEAR(back.theta, 0.7, 1e-12);
  const auto next = m.predict_next(z, 0.4);
  const env::StepResult truth = env::step(s, 0.4, p.params());
  EXPECT_NEAR(next.mean(2), truth.state.theta_dot, 1e-12);
  EXPECT_NEAR(m.predict_reward(z, 0.4).mean, truth.reward, 1e-12);
}

TEST(Mpc, TrajectoryShapes) {
  env::Pendulum p;
  const TrueDynamicsModel m(p);
  CemConfig c;
  c.horizon = 5;
  c.population = 20;
  c.elites = 4;
  c.iterations = 2;
  const Trajectory t = mpc_run(p, {std::numbers::pi, 0.0}, m, c, 6);
  EXPECT_EQ(t.frames.size(), 8u);
  EXPECT_EQ(t.states.size(), 8u);
  EXPECT_EQ(t.actions.size(), 6u);
  EXPECT_EQ(t.rewards.size(), 6u);
  EXPECT_EQ(t.latents.size(), 6u);
  double sum = 0;
  for (double r : t.rewards) sum += r;
  EXPECT_DOUBLE_EQ(t.cumulative_reward(), sum);
}

TEST(Mpc, OracleSwingUpSucceeds) {
  env::Pendulum p;
  const TrueDynamicsModel m(p);
  CemConfig c;
  c.seed = 4;
  const Trajectory t = mpc_run(p, {std::numbers::pi, 0.0}, m, c, 150);
  EXPECT_TRUE(experiments::success(t.rewards));
  EXPECT_GT(t.cumulative_reward(), -500.0);
}

}  // namespace
}  // namespace dlgpd::planner
