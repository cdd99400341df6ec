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

#include "dlgpd/dlgpd.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dlgpd/config.h"
#include "dlgpd/dataset.h"
#include "dlgpd/experiments.h"
#include "dlgpd/model.h"
#include "dlgpd/verify.h"

struct dlgpd_config {
  nlohmann::json json;
};

struct dlgpd_model {
  dlgpd::model::Checkpoint ckpt;
  std::unique_ptr<dlgpd::model::ConditionedModel> conditioned;
};

namespace {

using dlgpd::ErrorKind;

thread_local std::string g_last_error;

struct LogSink {
  std::mutex mu;
  dlgpd_log_fn fn = nullptr;
  void* user = nullptr;
  int level = 1;
  std::shared_ptr<spdlog::logger> fallback;
};

LogSink& sink() {
  static LogSink s;
  return s;
}

void log(int level, const std::string& msg) {
  LogSink& s = sink();
  std::lock_guard<std::mutex> lock(s.mu);
  if (level < s.level) return;
  if (s.fn) {
    s.fn(level, msg.c_str(), s.user);
    return;
  }
  if (!s.fallback) {
    s.fallback = spdlog::stderr_color_mt("dlgpd");
    s.fallback->set_pattern("[%H:%M:%S] %^%l%$ %v");
    s.fallback->set_level(spdlog::level::trace);
  }
  static constexpr spdlog::level::level_enum kLevels[] = {
      spdlog::level::debug, spdlog::level::info, spdlog::level::warn, spdlog::level::err};
  s.fallback->log(kLevels[std::clamp(level, 0, 3)], msg);
}

dlgpd::experiments::Progress progress() {
  return [](const std::string& m) { log(1, m); };
}

dlgpd_status to_status(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument: return DLGPD_ERR_INVALID_ARGUMENT;
    case ErrorKind::kIo: return DLGPD_ERR_IO;
    case ErrorKind::kNumerical: return DLGPD_ERR_NUMERICAL;
    case ErrorKind::kState: return DLGPD_ERR_STATE;
  }
  return DLGPD_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes and the last error.
template <typename F>
dlgpd_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return DLGPD_OK;
  } catch (const dlgpd::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return DLGPD_ERR_INVALID_ARGUMENT;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return DLGPD_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DLGPD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DLGPD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DLGPD_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) dlgpd::fail(ErrorKind::kInvalidArgument, std::string(what) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dlgpd::config::RunConfig resolve(const dlgpd_config* cfg) {
  need(cfg, "config");
  return dlgpd::config::RunConfig::from_json(cfg->json);
}

std::vector<int> subsets_of(const dlgpd::config::RunConfig& c, int subset) {
  if (subset <= 0) return c.eval.subset_sizes;
  dlgpd::require(subset <= c.data.pool_size, "subset exceeds the pool size");
  return {subset};
}

std::vector<std::string> variants_of(const dlgpd::config::RunConfig& c, const char* variant,
                                     bool skip_original) {
  if (variant) {
    const auto v = dlgpd::env::Variant::parse(variant).name();
    return {v};
  }
  std::vector<std::string> out;
  for (const auto& v : c.data.variants) {
    if (!(skip_original && v == "original")) out.push_back(v);
  }
  return out;
}

}  // namespace

extern "C" {

const char* dlgpd_version(void) { return "1.0.0"; }

const char* dlgpd_status_string(dlgpd_status status) {
  switch (status) {
    case DLGPD_OK: return "ok";
    case DLGPD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DLGPD_ERR_IO: return "i/o error";
    case DLGPD_ERR_NUMERICAL: return "numerical error";
    case DLGPD_ERR_STATE: return "invalid state";
    case DLGPD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* dlgpd_last_error(void) { return g_last_error.c_str(); }

void dlgpd_string_free(char* s) { std::free(s); }

void dlgpd_set_log_callback(dlgpd_log_fn fn, void* user) {
  LogSink& s = sink();
  std::lock_guard<std::mutex> lock(s.mu);
  s.fn = fn;
  s.user = user;
}

void dlgpd_set_log_level(int level) {
  LogSink& s = sink();
  std::lock_guard<std::mutex> lock(s.mu);
  s.level = level;
}

dlgpd_status dlgpd_config_create(dlgpd_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    *out = new dlgpd_config{dlgpd::config::defaults()};
  });
}

void dlgpd_config_free(dlgpd_config* cfg) { delete cfg; }

dlgpd_status dlgpd_config_merge_file(dlgpd_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    need(path, "path");
    cfg->json = dlgpd::config::merge_strict(cfg->json, dlgpd::config::read_json(path));
  });
}

dlgpd_status dlgpd_config_merge_json(dlgpd_config* cfg, const char* text) {
  return guarded([&] {
    need(cfg, "config");
    need(text, "json");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      dlgpd::fail(ErrorKind::kInvalidArgument, std::string("malformed JSON: ") + e.what());
    }
    cfg->json = dlgpd::config::merge_strict(cfg->json, j);
  });
}

dlgpd_status dlgpd_config_set(dlgpd_config* cfg, const char* assignment) {
  return guarded([&] {
    need(cfg, "config");
    need(assignment, "assignment");
    nlohmann::json j = cfg->json;
    dlgpd::config::apply_assignment(j, assignment);
    cfg->json = std::move(j);
  });
}

dlgpd_status dlgpd_config_set_seed(dlgpd_config* cfg, uint64_t seed) {
  return guarded([&] {
    need(cfg, "config");
    cfg->json["seed"] = seed;
  });
}

dlgpd_status dlgpd_config_to_json(const dlgpd_config* cfg, char** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    *out = copy_string(resolve(cfg).to_json().dump(2));
  });
}

dlgpd_status dlgpd_collect(const dlgpd_config* cfg, const char* workspace) {
  return guarded([&] {
    need(workspace, "workspace");
    const auto c = resolve(cfg);
    dlgpd::experiments::generate_datasets(c, dlgpd::experiments::Layout(workspace), progress());
  });
}

dlgpd_status dlgpd_train(const dlgpd_config* cfg, const char* workspace, int index) {
  return guarded([&] {
    need(workspace, "workspace");
    const auto c = resolve(cfg);
    dlgpd::require(index < c.models, "model index exceeds train.models");
    const dlgpd::experiments::Layout layout(workspace);
    for (int k = index < 0 ? 0 : index; k < (index < 0 ? c.models : index + 1); ++k) {
      dlgpd::experiments::train_model(c, layout, k, progress());
    }
  });
}

dlgpd_status dlgpd_eval_control(const dlgpd_config* cfg, const char* workspace,
                                const char* variant, int subset) {
  return guarded([&] {
    need(workspace, "workspace");
    const auto c = resolve(cfg);
    const dlgpd::experiments::Layout layout(workspace);
    for (const auto& v : variants_of(c, variant, false)) {
      for (int s : subsets_of(c, subset)) {
        const auto trials = dlgpd::experiments::evaluate_control(c, layout, v, s, progress());
        double mean = 0.0;
        int ok = 0;
        for (const auto& t : trials) {
          mean += t.cumulative_reward / trials.size();
          ok += t.success ? 1 : 0;
        }
        log(1, "control " + v + " subset " + std::to_string(s) + ": mean return " +
                   std::to_string(mean) + ", " + std::to_string(ok) + "/" +
                   std::to_string(trials.size()) + " successes");
      }
    }
  });
}

dlgpd_status dlgpd_transfer(const dlgpd_config* cfg, const char* workspace, const char* variant,
                            int subset) {
  return guarded([&] {
    need(workspace, "workspace");
    const auto c = resolve(cfg);
    const dlgpd::experiments::Layout layout(workspace);
    const auto subsets = subsets_of(c, subset);
    for (const auto& v : variants_of(c, variant, true)) {
      const auto res = dlgpd::experiments::transfer_eval(c, layout, v, subsets, progress());
      for (const auto& r : res.rows) {
        log(1, "transfer " + r.variant + " " + r.evidence + " subset " +
                   std::to_string(r.subset) + ": mean return " + std::to_string(r.mean) +
                   ", success rate " + std::to_string(r.success_rate));
      }
    }
  });
}

dlgpd_status dlgpd_export_latents(const char* checkpoint, const char* rollout_dir, int limit,
                                  const char* trial_json, const char* out_tsv) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(rollout_dir, "rollout_dir");
    need(out_tsv, "out_tsv");
    const auto ckpt = dlgpd::model::load_checkpoint(checkpoint);
    const auto rollouts =
        dlgpd::data::load_rollouts(rollout_dir, limit > 0 ? limit : -1);
    std::optional<dlgpd::planner::Trajectory> traj;
    if (trial_json) traj = dlgpd::experiments::read_trial_trajectory(trial_json);
    const auto rows =
        dlgpd::experiments::export_latents(ckpt, rollouts, traj ? &*traj : nullptr);
    dlgpd::experiments::write_latents_tsv(out_tsv, rows);
    log(1, "wrote " + std::to_string(rows.size()) + " latent rows to " + out_tsv);
  });
}

void dlgpd_verify_options_init(dlgpd_verify_options* opts) {
  if (!opts) return;
  *opts = dlgpd_verify_options{};
  opts->threads = 1;
}

dlgpd_status dlgpd_verify(const dlgpd_verify_options* opts, int* passed, int* failed) {
  return guarded([&] {
    need(opts, "options");
    dlgpd::verify::Options o;
    o.seed = opts->seed;
    if (opts->criteria) o.criteria.assign(opts->criteria, opts->criteria + opts->num_criteria);
    if (opts->work_dir) o.work_dir = opts->work_dir;
    if (opts->preset_config) o.preset_config = opts->preset_config;
    dlgpd::require(opts->threads >= 1, "threads must be at least 1");
    o.threads = opts->threads;
    o.progress = [](const std::string& m) { log(1, m); };
    int np = 0, nf = 0;
    for (const auto& r : dlgpd::verify::run(o)) {
      (r.passed ? np : nf)++;
      const std::string line = dlgpd::verify::format(r);
      if (opts->on_result) opts->on_result(r.id, r.passed ? 1 : 0, line.c_str(), opts->user);
    }
    if (passed) *passed = np;
    if (failed) *failed = nf;
  });
}

dlgpd_status dlgpd_model_load(const char* checkpoint, dlgpd_model** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    *out = nullptr;
    auto m = std::make_unique<dlgpd_model>();
    m->ckpt = dlgpd::model::load_checkpoint(checkpoint);
    *out = m.release();
  });
}

void dlgpd_model_free(dlgpd_model* model) { delete model; }

dlgpd_status dlgpd_model_hash(const dlgpd_model* model, uint64_t* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = model->ckpt.params.hash();
  });
}

dlgpd_status dlgpd_model_epoch(const dlgpd_model* model, int* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = model->ckpt.epoch;
  });
}

dlgpd_status dlgpd_model_condition(dlgpd_model* model, const char* rollout_dir, int limit,
                                   uint64_t seed) {
  return guarded([&] {
    need(model, "model");
    need(rollout_dir, "rollout_dir");
    const auto rollouts =
        dlgpd::data::load_rollouts(rollout_dir, limit > 0 ? limit : -1);
    model->conditioned = std::make_unique<dlgpd::model::ConditionedModel>(
        dlgpd::model::condition(model->ckpt.params, model->ckpt.norm, rollouts, seed));
  });
}

dlgpd_status dlgpd_model_predict(const dlgpd_model* model, const double state[3], double action,
                                 double mean[3], double variance[3], double* reward) {
  return guarded([&] {
    need(model, "model");
    need(state, "state");
    if (!model->conditioned) {
      dlgpd::fail(ErrorKind::kState, "model has not been conditioned on evidence");
    }
    const dlgpd::Latent s(state[0], state[1], state[2]);
    const auto p = model->conditioned->predict_next(s, action);
    for (int d = 0; d < 3; ++d) {
      if (mean) mean[d] = p.mean(d);
      if (variance) variance[d] = p.variance(d);
    }
    if (reward) *reward = model->conditioned->predict_reward_mean(s, action);
  });
}

}  // extern "C"
