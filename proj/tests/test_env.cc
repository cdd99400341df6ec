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

#include <gtest/gtest.h>

#include "dlgpd/env.h"

namespace dlgpd::env {
namespace {

TEST(PendulumStep, MatchesSemiImplicitEuler) {
  const PendulumParams p;
  const PhysicalState s{0.3, -1.2};
  const double a = 0.7;
  const StepResult r = step(s, a, p);
  const double thdot = s.theta_dot + (3 * p.g / (2 * p.l) * std::sin(s.theta) +
                                      3.0 / (p.m * p.l * p.l) * a) * p.dt;
  EXPECT_DOUBLE_EQ(r.state.theta_dot, thdot);
  EXPECT_DOUBLE_EQ(r.state.theta, s.theta + thdot * p.dt);
}

TEST(PendulumStep, UprightAtRestHasZeroReward) {
  const StepResult r = step({0.0, 0.0}, 0.0, PendulumParams{});
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(r.state.theta, 0.0);
}

TEST(PendulumStep, RewardPenalizesAngleVelocityAndTorque) {
  const PendulumParams p;
  const StepResult r = step({std::numbers::pi, 0.0}, 2.0, p);
  EXPECT_LT(r.reward, -std::numbers::pi * std::numbers::pi + 1e-9);
  EXPECT_GE(r.reward, -16.2736044);
}

TEST(PendulumStep, ClipsTorqueAndSpeed) {
  const PendulumParams p;
  const StepResult a = step({1.0, 0.0}, 5.0, p);
  const StepResult b = step({1.0, 0.0}, 2.0, p);
  EXPECT_EQ(a.state.theta, b.state.theta);
  const StepResult fast = step({0.0, 7.99}, 2.0, p);
  EXPECT_LE(fast.state.theta_dot, p.max_speed);
}

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi), std::numbers::pi, 1e-12);
  EXPECT_NEAR(wrap_angle(-std::numbers::pi), std::numbers::pi, 1e-12);
  EXPECT_NEAR(wrap_angle(0.5), 0.5, 1e-15);
  EXPECT_NEAR(wrap_angle(-0.5 - 4 * std::numbers::pi), -0.5, 1e-12);
}

TEST(Variants, InvertedActionFlipsTorque) {
  const PendulumParams base;
  const PendulumParams inv = make_variant(base, Variant::inverted_action());
  const StepResult a = step({0.4, 0.1}, 1.5, inv);
  const StepResult b = step({0.4, 0.1}, -1.5, base);
  EXPECT_EQ(a.state.theta, b.state.theta);
  EXPECT_EQ(a.state.theta_dot, b.state.theta_dot);
}

TEST(Variants, ParseAndName) {
  EXPECT_EQ(Variant::parse("original").name(), "original");
  EXPECT_EQ(Variant::parse("inverted-action").name(), "inverted-action");
  EXPECT_EQ(Variant::parse("mass-1.5").name(), "mass-1.5");
  EXPECT_DOUBLE_EQ(make_variant({}, Variant::parse("mass-0.2")).m, 0.2);
  EXPECT_THROW(Variant::parse("gravity-2"), Error);
  EXPECT_THROW(Variant::parse("mass--1"), Error);
}

TEST(Params, ValidateRejectsNonPositive) {
  PendulumParams p;
  p.m = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.dt = -0.1;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Render, DeterministicAndStateDependent) {
  const Frame a = render({0.3, 0.0});
  const Frame b = render({0.3, 5.0});
  const Frame c = render({1.3, 0.0});
  EXPECT_EQ(a, b);  // pixels show position only
  EXPECT_NE(a, c);
  EXPECT_EQ(a.size(), kImageSize);
  EXPECT_EQ(a.bytes().size(), std::size_t{kImageSize * kImageSize * 3});
}

TEST(Observation, StacksTwoFramesIntoSixChannels) {
  const Frame a = render({0.3, 0.0});
  const Frame b = render({0.5, 0.0});
  const Observation o = make_observation(a, b);
  EXPECT_EQ(o.data().size(), std::size_t{6 * kImageSize * kImageSize});
  const auto [pa, pb] = unstack(o);
  EXPECT_EQ(pa, a);
  EXPECT_EQ(pb, b);
}

TEST(Rollout, ShapesAndAlignment) {
  Rng rng(3);
  const Rollout r = collect_rollout({}, UniformInit::training(), uniform_random_policy(), 28, rng);
  EXPECT_EQ(r.frames.size(), 30u);
  EXPECT_EQ(r.actions.size(), 29u);
  EXPECT_EQ(r.rewards.size(), 29u);
  EXPECT_EQ(r.num_observations(), 29);
  EXPECT_EQ(r.num_transitions(), 28);
  // Transition t goes from observation t to t+1 under action t+1.
  EXPECT_EQ(r.transition_action(0), r.actions[1]);
  EXPECT_EQ(r.transition_reward(27), r.rewards[28]);
  for (double a : r.actions) {
    EXPECT_GE(a, -2.0);
    EXPECT_LE(a, 2.0);
  }
}

TEST(Rollout, RejectsZeroLength) {
  Rng rng(3);
  EXPECT_THROW(collect_rollout({}, UniformInit::training(), uniform_random_policy(), 0, rng),
               Error);
}

TEST(PendulumSim, ResetBootstrapsPreviousFrame) {
  Pendulum p;
  const Observation o = p.reset({std::numbers::pi, 0.0});
  EXPECT_EQ(o.data().size(), std::size_t{6 * kImageSize * kImageSize});
  const StepResult r = p.step(1.0);
  EXPECT_EQ(p.state().theta, r.state.theta);
  EXPECT_EQ(p.observation().data().size(), o.data().size());
}

}  // namespace
}  // namespace dlgpd::env
