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

#ifndef DLGPD_ENV_H_
#define DLGPD_ENV_H_

#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dlgpd/common.h"

namespace dlgpd::env {

inline constexpr int kImageSize = 64;
inline constexpr int kFrameChannels = 3;
inline constexpr int kObservationChannels = 2 * kFrameChannels;
inline constexpr double kActionBound = 2.0;

// theta = 0 is upright.
struct PhysicalState {
  double theta = 0.0;
  double theta_dot = 0.0;
};

struct PendulumParams {
  double g = 10.0;
  double m = 1.0;
  double l = 1.0;
  double dt = 0.05;
  double max_torque = 2.0;
  double max_speed = 8.0;
  int action_sign = 1;

  void validate() const;
};

struct StepResult {
  PhysicalState state;
  double reward = 0.0;
};

// Maps an angle into (-pi, pi].
double wrap_angle(double theta);

// One semi-implicit Euler step of the pendulum. The reward is attached to the
// step that produced it.
StepResult step(const PhysicalState& state, double action,
                const PendulumParams& params);

// 8-bit RGB image stored row-major (y, x, channel). Pixel values are exposed
// as k/255 reals in [0, 1].
class Frame {
 public:
  Frame() : Frame(kImageSize) {}
  explicit Frame(int size, std::uint8_t fill = 0);

  int size() const { return size_; }
  double at(int y, int x, int c) const {
    return bytes_[index(y, x, c)] / 255.0;
  }
  std::uint8_t& byte(int y, int x, int c) { return bytes_[index(y, x, c)]; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }
  std::span<std::uint8_t> bytes() { return bytes_; }

  bool operator==(const Frame& other) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * size_ + x) * kFrameChannels + c;
  }

  int size_;
  std::vector<std::uint8_t> bytes_;
};

struct RenderOptions {
  int image_size = kImageSize;
  // Fractions of the image size.
  double rod_length = 0.375;
  double rod_radius = 0.055;
  double background[3] = {1.0, 1.0, 1.0};
  double rod_color[3] = {0.8, 0.3, 0.3};
};

// Anti-aliased capsule drawn from the image centre. Depends on theta only.
Frame render(const PhysicalState& state, const RenderOptions& options = {});

// Channel-stacked image pair (previous, current), 6 x H x W planar floats.
class Observation {
 public:
  Observation() = default;
  Observation(int size, std::vector<float> data);

  int size() const { return size_; }
  std::span<const float> data() const { return data_; }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * size_ + y) * size_ + x];
  }

  bool operator==(const Observation& other) const = default;

 private:
  int size_ = 0;
  std::vector<float> data_;
};

Observation make_observation(const Frame& prev, const Frame& cur);
std::pair<Frame, Frame> unstack(const Observation& obs);

struct Transition {
  Observation obs;
  double action = 0.0;
  Observation next_obs;
  double reward = 0.0;
};

// A rollout of T transitions keeps T + 2 frames. actions[k] and rewards[k]
// belong to the step taking frame k to frame k + 1; index 0 is the bootstrap
// step that produces the second frame of the first observation. Transition t
// is (frames t, t+1) --actions[t+1]--> (frames t+1, t+2) with rewards[t+1].
struct Rollout {
  PhysicalState init_state;
  std::vector<Frame> frames;
  std::vector<double> actions;
  std::vector<double> rewards;
  std::vector<PhysicalState> true_states;  // empty when unavailable

  int num_transitions() const {
    return frames.size() < 2 ? 0 : static_cast<int>(frames.size()) - 2;
  }
  Observation observation(int k) const;  // frames (k, k+1)
  int num_observations() const { return num_transitions() + 1; }
  Transition transition(int t) const;
  double transition_action(int t) const { return actions[t + 1]; }
  double transition_reward(int t) const { return rewards[t + 1]; }
  void validate() const;
};

struct UniformInit {
  double theta_lo = -std::numbers::pi;
  double theta_hi = std::numbers::pi;
  double theta_dot_lo = -8.0;
  double theta_dot_hi = 8.0;

  PhysicalState sample(Rng& rng) const;
  static UniformInit training() { return {}; }
  static UniformInit swing_up() {
    return {std::numbers::pi - 0.05, std::numbers::pi + 0.05, -0.05, 0.05};
  }
};

using Policy = std::function<double(Rng&, const PhysicalState&, int step)>;

// a ~ U([-2, 2]).
Policy uniform_random_policy();

Rollout collect_rollout(const PendulumParams& params, const UniformInit& init,
                        const Policy& policy, int length, Rng& rng,
                        const RenderOptions& render_options = {});

enum class VariantKind { kOriginal, kInvertedAction, kMass };

struct Variant {
  VariantKind kind = VariantKind::kOriginal;
  double mass = 1.0;

  static Variant original() { return {}; }
  static Variant inverted_action() { return {VariantKind::kInvertedAction}; }
  static Variant with_mass(double m) { return {VariantKind::kMass, m}; }

  // "original", "inverted-action", "mass-0.2", ...
  std::string name() const;
  static Variant parse(const std::string& name);
};

PendulumParams make_variant(const PendulumParams& base, const Variant& variant);

// Stateful simulator used for closed-loop control. The observation is always
// built from the last two rendered frames.
class Pendulum {
 public:
  explicit Pendulum(PendulumParams params = {}, RenderOptions render = {});

  // Renders the initial frame, applies the bootstrap action and returns the
  // first observation.
  Observation reset(const PhysicalState& init, double bootstrap_action = 0.0);
  StepResult step(double action);

  const PhysicalState& state() const { return state_; }
  const PendulumParams& params() const { return params_; }
  Observation observation() const { return make_observation(prev_, cur_); }
  const Frame& previous_frame() const { return prev_; }
  const Frame& current_frame() const { return cur_; }

 private:
  PendulumParams params_;
  RenderOptions render_;
  PhysicalState state_;
  Frame prev_;
  Frame cur_;
};

}  // namespace dlgpd::env

#endif  // DLGPD_ENV_H_
