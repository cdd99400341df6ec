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

#include "dlgpd/env.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dlgpd::env {
namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    fail(ErrorKind::kInvalidArgument, std::string("non-finite ") + what);
  }
}

}  // namespace

void PendulumParams::validate() const {
  require(m > 0.0, "pendulum mass must be positive");
  require(l > 0.0, "pendulum length must be positive");
  require(dt > 0.0, "integration step must be positive");
  require(max_torque > 0.0 && max_speed > 0.0, "bounds must be positive");
  require(action_sign == 1 || action_sign == -1, "action_sign must be +1 or -1");
}

double wrap_angle(double theta) {
  double r = std::remainder(theta, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

StepResult step(const PhysicalState& state, double action,
                const PendulumParams& params) {
  require_finite(state.theta, "theta");
  require_finite(state.theta_dot, "theta_dot");
  require_finite(action, "action");

  const double u = std::clamp(params.action_sign * action, -params.max_torque,
                              params.max_torque);
  const double accel = 3.0 * params.g / (2.0 * params.l) * std::sin(state.theta) +
                       3.0 / (params.m * params.l * params.l) * u;
  StepResult out;
  out.state.theta_dot = std::clamp(state.theta_dot + accel * params.dt,
                                   -params.max_speed, params.max_speed);
  out.state.theta = state.theta + out.state.theta_dot * params.dt;
  const double th = wrap_angle(state.theta);
  out.reward = -(th * th + 0.1 * out.state.theta_dot * out.state.theta_dot +
                 0.001 * u * u);
  return out;
}

Frame::Frame(int size, std::uint8_t fill)
    : size_(size),
      bytes_(static_cast<std::size_t>(size) * size * kFrameChannels, fill) {
  require(size > 0, "frame size must be positive");
}

Frame render(const PhysicalState& state, const RenderOptions& options) {
  require_finite(state.theta, "theta");
  const int n = options.image_size;
  const double theta = wrap_angle(state.theta);
  const double centre = 0.5 * (n - 1);
  const double length = options.rod_length * n;
  const double radius = options.rod_radius * n;
  // Image y grows downwards; theta = 0 points up.
  const double dx = std::sin(theta) * length;
  const double dy = -std::cos(theta) * length;
  const double len_sq = dx * dx + dy * dy;

  Frame frame(n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double px = x - centre;
      const double py = y - centre;
      const double t = std::clamp((px * dx + py * dy) / len_sq, 0.0, 1.0);
      const double ex = px - t * dx;
      const double ey = py - t * dy;
      const double dist = std::sqrt(ex * ex + ey * ey);
      const double coverage = std::clamp(radius + 0.5 - dist, 0.0, 1.0);
      for (int c = 0; c < kFrameChannels; ++c) {
        const double v = options.background[c] * (1.0 - coverage) +
                         options.rod_color[c] * coverage;
        frame.byte(y, x, c) =
            static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  return frame;
}

Observation::Observation(int size, std::vector<float> data)
    : size_(size), data_(std::move(data)) {
  require(data_.size() ==
              static_cast<std::size_t>(kObservationChannels) * size * size,
          "observation buffer has wrong size");
}

Observation make_observation(const Frame& prev, const Frame& cur) {
  require(prev.size() == cur.size(), "frame size mismatch");
  const int n = prev.size();
  std::vector<float> data(static_cast<std::size_t>(kObservationChannels) * n * n);
  const Frame* frames[2] = {&prev, &cur};
  for (int f = 0; f < 2; ++f) {
    for (int c = 0; c < kFrameChannels; ++c) {
      float* plane = data.data() +
                     static_cast<std::size_t>(f * kFrameChannels + c) * n * n;
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          plane[y * n + x] = static_cast<float>(frames[f]->at(y, x, c));
        }
      }
    }
  }
  return Observation(n, std::move(data));
}

std::pair<Frame, Frame> unstack(const Observation& obs) {
  const int n = obs.size();
  Frame prev(n), cur(n);
  Frame* frames[2] = {&prev, &cur};
  for (int f = 0; f < 2; ++f) {
    for (int c = 0; c < kFrameChannels; ++c) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          frames[f]->byte(y, x, c) = static_cast<std::uint8_t>(
              std::lround(obs.at(f * kFrameChannels + c, y, x) * 255.0f));
        }
      }
    }
  }
  return {std::move(prev), std::move(cur)};
}

Observation Rollout::observation(int k) const {
  require(k >= 0 && k + 1 < static_cast<int>(frames.size()),
          "observation index out of range");
  return make_observation(frames[k], frames[k + 1]);
}

Transition Rollout::transition(int t) const {
  require(t >= 0 && t < num_transitions(), "transition index out of range");
  return {observation(t), actions[t + 1], observation(t + 1), rewards[t + 1]};
}

void Rollout::validate() const {
  require(frames.size() >= 3, "rollout needs at least one transition");
  require(actions.size() + 1 == frames.size(), "rollout action count mismatch");
  require(rewards.size() == actions.size(), "rollout reward count mismatch");
  require(true_states.empty() || true_states.size() == frames.size(),
          "rollout true-state count mismatch");
  for (const auto& f : frames) {
    require(f.size() == frames.front().size(), "rollout frame size mismatch");
  }
}

PhysicalState UniformInit::sample(Rng& rng) const {
  std::uniform_real_distribution<double> th(theta_lo, theta_hi);
  std::uniform_real_distribution<double> thd(theta_dot_lo, theta_dot_hi);
  PhysicalState s;
  s.theta = th(rng);
  s.theta_dot = thd(rng);
  return s;
}

Policy uniform_random_policy() {
  return [](Rng& rng, const PhysicalState&, int) {
    std::uniform_real_distribution<double> u(-kActionBound, kActionBound);
    return u(rng);
  };
}

Rollout collect_rollout(const PendulumParams& params, const UniformInit& init,
                        const Policy& policy, int length, Rng& rng,
                        const RenderOptions& render_options) {
  require(length >= 1, "rollout length must be at least 1");
  params.validate();
  Rollout r;
  r.init_state = init.sample(rng);
  PhysicalState s = r.init_state;
  r.frames.reserve(length + 2);
  r.true_states.reserve(length + 2);
  r.frames.push_back(render(s, render_options));
  r.true_states.push_back(s);
  for (int k = 0; k <= length; ++k) {
    const double a = policy(rng, s, k);
    const StepResult res = step(s, a, params);
    s = res.state;
    r.actions.push_back(a);
    r.rewards.push_back(res.reward);
    r.frames.push_back(render(s, render_options));
    r.true_states.push_back(s);
  }
  return r;
}

std::string Variant::name() const {
  switch (kind) {
    case VariantKind::kOriginal:
      return "original";
    case VariantKind::kInvertedAction:
      return "inverted-action";
    case VariantKind::kMass: {
      std::ostringstream os;
      os << "mass-" << mass;
      return os.str();
    }
  }
  return "unknown";
}

Variant Variant::parse(const std::string& name) {
  if (name == "original") return original();
  if (name == "inverted-action") return inverted_action();
  if (name.rfind("mass-", 0) == 0) {
    std::size_t used = 0;
    double m = 0.0;
    try {
      m = std::stod(name.substr(5), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used > 0 && used == name.size() - 5, "bad variant name: " + name);
    require(m > 0.0, "variant mass must be positive");
    return with_mass(m);
  }
  fail(ErrorKind::kInvalidArgument, "unknown variant: " + name);
}

PendulumParams make_variant(const PendulumParams& base, const Variant& variant) {
  PendulumParams p = base;
  switch (variant.kind) {
    case VariantKind::kOriginal:
      break;
    case VariantKind::kInvertedAction:
      p.action_sign = -base.action_sign;
      break;
    case VariantKind::kMass:
      require(variant.mass > 0.0, "variant mass must be positive");
      p.m = variant.mass;
      break;
  }
  p.validate();
  return p;
}

Pendulum::Pendulum(PendulumParams params, RenderOptions render)
    : params_(params),
      render_(render),
      prev_(render.image_size),
      cur_(render.image_size) {
  params_.validate();
}

Observation Pendulum::reset(const PhysicalState& init, double bootstrap_action) {
  state_ = init;
  cur_ = render(state_, render_);
  step(bootstrap_action);
  return observation();
}

StepResult Pendulum::step(double action) {
  StepResult res = env::step(state_, action, params_);
  state_ = res.state;
  prev_ = std::move(cur_);
  cur_ = render(state_, render_);
  return res;
}

}  // namespace dlgpd::env
