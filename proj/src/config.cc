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

#include "dlgpd/config.h"

#include <fstream>

namespace dlgpd::config {
namespace {

using nlohmann::json;

json init_to_json(const env::UniformInit& i) {
  return {{"theta", {i.theta_lo, i.theta_hi}}, {"theta_dot", {i.theta_dot_lo, i.theta_dot_hi}}};
}

env::UniformInit init_from_json(const json& j) {
  env::UniformInit i;
  i.theta_lo = j.at("theta").at(0).get<double>();
  i.theta_hi = j.at("theta").at(1).get<double>();
  i.theta_dot_lo = j.at("theta_dot").at(0).get<double>();
  i.theta_dot_hi = j.at("theta_dot").at(1).get<double>();
  return i;
}

void merge_into(json& base, const json& overlay, const std::string& path) {
  if (!overlay.is_object()) {
    fail(ErrorKind::kInvalidArgument, "config section '" + path + "' must be an object");
  }
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) fail(ErrorKind::kInvalidArgument, "unknown config key: " + key);
    json& target = base[it.key()];
    if (target.is_object()) {
      merge_into(target, it.value(), key);
    } else {
      target = it.value();
    }
  }
}

}  // namespace

json defaults() {
  RunConfig c;
  c.train.checkpoint_every = 100;
  return c.to_json();
}

json merge_strict(const json& base, const json& overlay) {
  json out = base;
  merge_into(out, overlay, "");
  return out;
}

void apply_assignment(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail(ErrorKind::kInvalidArgument, "expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      fail(ErrorKind::kInvalidArgument, "unknown config key: " + key);
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) {
    fail(ErrorKind::kInvalidArgument, "config key '" + key + "' names a section, not a value");
  }
  *node = value;
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["env"] = {{"g", env.g},
              {"m", env.m},
              {"l", env.l},
              {"dt", env.dt},
              {"max_torque", env.max_torque},
              {"max_speed", env.max_speed}};
  j["data"] = {{"train_rollouts", data.train_rollouts},
               {"rollout_len", data.rollout_len},
               {"pools", data.pools},
               {"pool_size", data.pool_size},
               {"variants", data.variants},
               {"train_init", init_to_json(data.train_init)}};
  j["model"] = {{"arch", arch}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"lr", train.adam.lr},
                {"beta1", train.adam.beta1},
                {"beta2", train.adam.beta2},
                {"eps", train.adam.eps},
                {"checkpoint_every", train.checkpoint_every},
                {"models", models}};
  j["planner"] = {{"horizon", planner.horizon},
                  {"population", planner.population},
                  {"elites", planner.elites},
                  {"iterations", planner.iterations},
                  {"initial_stddev", planner.initial_stddev},
                  {"min_stddev", planner.min_stddev},
                  {"action_bounds", {planner.action_lo, planner.action_hi}},
                  {"reward_samples", planner.reward_samples},
                  {"warm_start", planner.warm_start}};
  j["eval"] = {{"episode_len", eval.episode_len},
               {"subset_sizes", eval.subset_sizes},
               {"models", eval.models},
               {"pools", eval.pools},
               {"trials", eval.trials},
               {"init", init_to_json(eval.init)}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.threads = j.at("threads").get<int>();
    const auto& e = j.at("env");
    c.env.g = e.at("g").get<double>();
    c.env.m = e.at("m").get<double>();
    c.env.l = e.at("l").get<double>();
    c.env.dt = e.at("dt").get<double>();
    c.env.max_torque = e.at("max_torque").get<double>();
    c.env.max_speed = e.at("max_speed").get<double>();
    const auto& d = j.at("data");
    c.data.train_rollouts = d.at("train_rollouts").get<int>();
    c.data.rollout_len = d.at("rollout_len").get<int>();
    c.data.pools = d.at("pools").get<int>();
    c.data.pool_size = d.at("pool_size").get<int>();
    c.data.variants = d.at("variants").get<std::vector<std::string>>();
    c.data.train_init = init_from_json(d.at("train_init"));
    c.arch = j.at("model").at("arch").get<std::string>();
    const auto& t = j.at("train");
    c.train.epochs = t.at("epochs").get<int>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.adam.lr = t.at("lr").get<double>();
    c.train.adam.beta1 = t.at("beta1").get<double>();
    c.train.adam.beta2 = t.at("beta2").get<double>();
    c.train.adam.eps = t.at("eps").get<double>();
    c.train.checkpoint_every = t.at("checkpoint_every").get<int>();
    c.models = t.at("models").get<int>();
    const auto& p = j.at("planner");
    c.planner.horizon = p.at("horizon").get<int>();
    c.planner.population = p.at("population").get<int>();
    c.planner.elites = p.at("elites").get<int>();
    c.planner.iterations = p.at("iterations").get<int>();
    c.planner.initial_stddev = p.at("initial_stddev").get<double>();
    c.planner.min_stddev = p.at("min_stddev").get<double>();
    c.planner.action_lo = p.at("action_bounds").at(0).get<double>();
    c.planner.action_hi = p.at("action_bounds").at(1).get<double>();
    c.planner.reward_samples = p.at("reward_samples").get<int>();
    c.planner.warm_start = p.at("warm_start").get<bool>();
    const auto& v = j.at("eval");
    c.eval.episode_len = v.at("episode_len").get<int>();
    c.eval.subset_sizes = v.at("subset_sizes").get<std::vector<int>>();
    c.eval.models = v.at("models").get<int>();
    c.eval.pools = v.at("pools").get<int>();
    c.eval.trials = v.at("trials").get<int>();
    c.eval.init = init_from_json(v.at("init"));
  } catch (const json::exception& ex) {
    fail(ErrorKind::kInvalidArgument, std::string("invalid configuration: ") + ex.what());
  }
  c.train.arch = c.net_arch();
  c.train.seed = c.seed;
  c.planner.seed = c.seed;
  c.planner.threads = c.threads;
  c.validate();
  return c;
}

void RunConfig::validate() const {
  require(threads >= 1, "threads must be at least 1");
  env.validate();
  require(data.train_rollouts >= 1 && data.rollout_len >= 1 && data.pools >= 1 &&
              data.pool_size >= 1,
          "data counts must be at least 1");
  require(!data.variants.empty(), "at least one environment variant is required");
  for (const auto& v : data.variants) env::Variant::parse(v);
  require(models >= 1, "train.models must be at least 1");
  train.validate();
  planner.validate();
  require(eval.episode_len >= 1 && eval.trials >= 1 && eval.models >= 1 && eval.pools >= 1,
          "eval counts must be at least 1");
  require(eval.models <= models, "eval.models exceeds train.models");
  require(eval.pools <= data.pools, "eval.pools exceeds data.pools");
  require(!eval.subset_sizes.empty(), "eval.subset_sizes must not be empty");
  for (int s : eval.subset_sizes) {
    require(s >= 1 && s <= data.pool_size, "subset sizes must lie in [1, pool_size]");
  }
}

nets::NetArch RunConfig::net_arch() const {
  if (arch == "standard") return nets::NetArch::standard();
  if (arch == "tiny") return nets::NetArch::tiny();
  fail(ErrorKind::kInvalidArgument, "unknown model.arch: " + arch);
}

env::RenderOptions RunConfig::render() const {
  env::RenderOptions r;
  r.image_size = net_arch().image_size;
  return r;
}

std::uint64_t RunConfig::derive_seed(std::uint32_t a, std::uint32_t b, std::uint32_t c,
                                     std::uint32_t d) const {
  Rng rng = make_stream(seed, a, b, c, d);
  return rng();
}

RunConfig load(const std::optional<std::filesystem::path>& file,
               const std::vector<std::string>& assignments,
               std::optional<std::uint64_t> seed) {
  json cfg = defaults();
  if (file) cfg = merge_strict(cfg, read_json(*file));
  for (const auto& a : assignments) apply_assignment(cfg, a);
  if (seed) cfg["seed"] = *seed;
  return RunConfig::from_json(cfg);
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorKind::kIo, "cannot write " + path.string());
  os << j.dump(2) << "\n";
  if (!os) fail(ErrorKind::kIo, "failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidArgument, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace dlgpd::config
