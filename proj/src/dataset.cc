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

#include "dlgpd/dataset.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dlgpd::data {
namespace {

static_assert(std::endian::native == std::endian::little,
              "record files are written in host order, which must be little-endian");

constexpr char kMagic[8] = {'D', 'L', 'G', 'P', 'D', 'R', 'L', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  return v;
}

nlohmann::json params_to_json(const env::PendulumParams& p) {
  return {{"g", p.g},
          {"m", p.m},
          {"l", p.l},
          {"dt", p.dt},
          {"max_torque", p.max_torque},
          {"max_speed", p.max_speed},
          {"action_sign", p.action_sign}};
}

env::PendulumParams params_from_json(const nlohmann::json& j) {
  env::PendulumParams p;
  p.g = j.at("g").get<double>();
  p.m = j.at("m").get<double>();
  p.l = j.at("l").get<double>();
  p.dt = j.at("dt").get<double>();
  p.max_torque = j.at("max_torque").get<double>();
  p.max_speed = j.at("max_speed").get<double>();
  p.action_sign = j.at("action_sign").get<int>();
  p.validate();
  return p;
}

bool record_is_usable(const std::filesystem::path& path, int length, int image_size) {
  if (!std::filesystem::exists(path)) return false;
  try {
    const env::Rollout r = read_rollout(path);
    return r.num_transitions() == length && r.frames.front().size() == image_size;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

std::string rollout_filename(int index) {
  std::ostringstream os;
  os << "rollout_" << std::setw(5) << std::setfill('0') << index << ".bin";
  return os.str();
}

void write_rollout(const std::filesystem::path& path, const env::Rollout& rollout) {
  rollout.validate();
  const int n_trans = rollout.num_transitions();
  const int size = rollout.frames.front().size();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::kIo, "cannot write " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kFormatVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(n_trans));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(size));
    put<std::uint32_t>(os, env::kFrameChannels);
    put<std::uint32_t>(os, rollout.true_states.empty() ? 0u : 1u);
    put<std::uint32_t>(os, 0u);
    put<double>(os, rollout.init_state.theta);
    put<double>(os, rollout.init_state.theta_dot);
    for (const auto& f : rollout.frames) {
      const auto bytes = f.bytes();
      os.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    }
    put_doubles(os, rollout.actions);
    put_doubles(os, rollout.rewards);
    for (const auto& s : rollout.true_states) {
      put<double>(os, s.theta);
      put<double>(os, s.theta_dot);
    }
    if (!os) fail(ErrorKind::kIo, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

env::Rollout read_rollout(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::kIo, "cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::kIo, "not a rollout record: " + path.string());
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kFormatVersion) {
    fail(ErrorKind::kIo, "unsupported rollout format version in " + path.string());
  }
  const auto n_trans = get<std::uint32_t>(is);
  const auto size = get<std::uint32_t>(is);
  const auto channels = get<std::uint32_t>(is);
  const auto has_states = get<std::uint32_t>(is);
  get<std::uint32_t>(is);
  if (!is || channels != env::kFrameChannels || size == 0 || size > 4096 ||
      n_trans == 0 || n_trans > (1u << 20)) {
    fail(ErrorKind::kIo, "corrupt rollout header in " + path.string());
  }
  env::Rollout r;
  r.init_state.theta = get<double>(is);
  r.init_state.theta_dot = get<double>(is);
  r.frames.reserve(n_trans + 2);
  for (std::uint32_t k = 0; k < n_trans + 2; ++k) {
    env::Frame f(static_cast<int>(size));
    auto bytes = f.bytes();
    is.read(reinterpret_cast<char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    r.frames.push_back(std::move(f));
  }
  r.actions = get_doubles(is, n_trans + 1);
  r.rewards = get_doubles(is, n_trans + 1);
  if (has_states != 0) {
    r.true_states.resize(n_trans + 2);
    for (auto& s : r.true_states) {
      s.theta = get<double>(is);
      s.theta_dot = get<double>(is);
    }
  }
  if (!is) fail(ErrorKind::kIo, "truncated rollout record: " + path.string());
  is.peek();
  if (!is.eof()) fail(ErrorKind::kIo, "trailing bytes in rollout record: " + path.string());
  return r;
}

void generate_rollout_set(const std::filesystem::path& dir, const RolloutSetSpec& spec) {
  require(spec.count >= 1, "rollout count must be positive");
  require(spec.length >= 1, "rollout length must be positive");
  const env::PendulumParams params = env::make_variant(spec.base_params, spec.variant);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json files = nlohmann::json::array();
  const auto policy = env::uniform_random_policy();
  for (int i = 0; i < spec.count; ++i) {
    const std::string name = rollout_filename(i);
    files.push_back(name);
    const auto path = dir / name;
    if (record_is_usable(path, spec.length, spec.render.image_size)) continue;
    Rng rng = make_stream(spec.seed, static_cast<std::uint32_t>(i));
    const env::Rollout r =
        env::collect_rollout(params, spec.init, policy, spec.length, rng, spec.render);
    write_rollout(path, r);
  }

  nlohmann::json m;
  m["format_version"] = kFormatVersion;
  m["kind"] = "rollouts";
  m["variant"] = spec.variant.name();
  m["params"] = params_to_json(params);
  m["init"] = {{"theta", {spec.init.theta_lo, spec.init.theta_hi}},
               {"theta_dot", {spec.init.theta_dot_lo, spec.init.theta_dot_hi}}};
  m["seed"] = spec.seed;
  m["num_rollouts"] = spec.count;
  m["rollout_length"] = spec.length;
  m["image_size"] = spec.render.image_size;
  m["policy"] = "uniform[-2,2]";
  m["files"] = files;
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) fail(ErrorKind::kIo, "cannot write manifest in " + dir.string());
  os << m.dump(2) << "\n";
}

Manifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) fail(ErrorKind::kIo, "missing manifest.json in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
    Manifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kFormatVersion) {
      fail(ErrorKind::kIo, "unsupported manifest version in " + dir.string());
    }
    m.variant = j.at("variant").get<std::string>();
    m.params = params_from_json(j.at("params"));
    const auto& init = j.at("init");
    m.init.theta_lo = init.at("theta").at(0).get<double>();
    m.init.theta_hi = init.at("theta").at(1).get<double>();
    m.init.theta_dot_lo = init.at("theta_dot").at(0).get<double>();
    m.init.theta_dot_hi = init.at("theta_dot").at(1).get<double>();
    m.num_rollouts = j.at("num_rollouts").get<int>();
    m.rollout_length = j.at("rollout_length").get<int>();
    m.image_size = j.at("image_size").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.files = j.at("files").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kIo, "malformed manifest in " + dir.string() + ": " + e.what());
  }
}

std::vector<env::Rollout> load_rollouts(const std::filesystem::path& dir, int limit) {
  const Manifest m = read_manifest(dir);
  const int n = limit < 0 ? static_cast<int>(m.files.size())
                          : std::min<int>(limit, static_cast<int>(m.files.size()));
  if (limit > static_cast<int>(m.files.size())) {
    fail(ErrorKind::kInvalidArgument,
         "requested " + std::to_string(limit) + " rollouts but " + dir.string() +
             " holds " + std::to_string(m.files.size()));
  }
  std::vector<env::Rollout> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(read_rollout(dir / m.files[i]));
  return out;
}

TransitionSet::TransitionSet(std::vector<env::Rollout> rollouts)
    : rollouts_(std::move(rollouts)) {
  require(!rollouts_.empty(), "transition set needs at least one rollout");
  min_reward_ = std::numeric_limits<double>::infinity();
  for (int r = 0; r < static_cast<int>(rollouts_.size()); ++r) {
    rollouts_[r].validate();
    for (int t = 0; t < rollouts_[r].num_transitions(); ++t) {
      refs_.push_back({r, t});
      min_reward_ = std::min(min_reward_, rollouts_[r].transition_reward(t));
    }
  }
}

double TransitionSet::action(int i) const {
  const Ref& r = refs_[i];
  return rollouts_[r.rollout].transition_action(r.t);
}

double TransitionSet::reward(int i) const {
  const Ref& r = refs_[i];
  return rollouts_[r.rollout].transition_reward(r.t);
}

}  // namespace dlgpd::data
