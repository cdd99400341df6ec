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

// Command-line front end. Links only the C interface of the library.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlgpd/dlgpd.h"

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

struct ConfigFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config, "JSON file overlaid on the defaults")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "Override one value, e.g. --set train.epochs=300");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--threads", f.threads, "Worker threads for planning")->check(CLI::Range(1, 256));
}

class Config {
 public:
  ~Config() { dlgpd_config_free(cfg_); }
  dlgpd_config* get() const { return cfg_; }

  // Returns false with the reason printed when the configuration is invalid.
  bool build(const ConfigFlags& f) {
    if (!check(dlgpd_config_create(&cfg_))) return false;
    if (!f.config.empty() && !check(dlgpd_config_merge_file(cfg_, f.config.c_str()))) return false;
    for (const auto& s : f.sets) {
      if (!check(dlgpd_config_set(cfg_, s.c_str()))) return false;
    }
    if (f.seed && !check(dlgpd_config_set_seed(cfg_, *f.seed))) return false;
    if (f.threads) {
      const std::string a = "threads=" + std::to_string(*f.threads);
      if (!check(dlgpd_config_set(cfg_, a.c_str()))) return false;
    }
    char* text = nullptr;
    if (!check(dlgpd_config_to_json(cfg_, &text))) return false;
    dlgpd_string_free(text);
    return true;
  }

 private:
  static bool check(dlgpd_status s) {
    if (s == DLGPD_OK) return true;
    std::fprintf(stderr, "dlgpd: configuration error: %s\n", dlgpd_last_error());
    return false;
  }
  dlgpd_config* cfg_ = nullptr;
};

int finish(dlgpd_status s) {
  if (s == DLGPD_OK) return 0;
  std::fprintf(stderr, "dlgpd: %s: %s\n", dlgpd_status_string(s), dlgpd_last_error());
  return s == DLGPD_ERR_INVALID_ARGUMENT ? kUsageError : kRuntimeError;
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void print_result(int, int, const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep latent GP dynamics for pendulum control from pixels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dlgpd_version()));
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print warnings and errors");

  ConfigFlags flags;
  std::string out;

  auto* print = app.add_subcommand("print-config", "Print the effective configuration");
  add_config_flags(print, flags);

  auto* collect = app.add_subcommand("collect", "Generate training rollouts and evidence pools");
  add_config_flags(collect, flags);
  collect->add_option("--out", out, "Workspace directory")->required();

  int model_index = -1;
  auto* train = app.add_subcommand("train", "Train models on the collected training rollouts");
  add_config_flags(train, flags);
  train->add_option("--out", out, "Workspace directory")->required();
  train->add_option("--model", model_index, "Train only this model index");

  std::string variant;
  int subset = 0;
  auto* control = app.add_subcommand("eval-control", "MPC control with matching evidence");
  add_config_flags(control, flags);
  control->add_option("--out", out, "Workspace directory")->required();
  control->add_option("--variant", variant, "Environment variant (default: all configured)");
  control->add_option("--subset", subset, "Evidence rollouts (default: all subset sizes)")
      ->check(CLI::PositiveNumber);

  auto* transfer = app.add_subcommand(
      "transfer", "Matching versus original-environment evidence without retraining");
  add_config_flags(transfer, flags);
  transfer->add_option("--out", out, "Workspace directory")->required();
  transfer->add_option("--variant", variant,
                       "Environment variant (default: all configured except original)");
  transfer->add_option("--subset", subset, "Evidence rollouts (default: all subset sizes)")
      ->check(CLI::PositiveNumber);

  std::string checkpoint, rollouts, trial;
  int limit = 0;
  auto* latents = app.add_subcommand("export-latents", "Write mean latents as TSV");
  latents->add_option("--checkpoint", checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  latents->add_option("--rollouts", rollouts, "Rollout directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  latents->add_option("--limit", limit, "Use only the first N rollouts")
      ->check(CLI::PositiveNumber);
  latents->add_option("--trial", trial, "Trial JSON whose trajectory is appended")
      ->check(CLI::ExistingFile);
  latents->add_option("--out", out, "Output TSV file")->required();

  std::uint64_t verify_seed = 0;
  std::vector<int> criteria;
  std::string work_dir = "verify_work";
  std::string preset_config;
  int verify_threads = 1;
  auto* verify = app.add_subcommand("verify", "Run the acceptance checks");
  verify->add_option("--seed", verify_seed, "Seed of the checks");
  verify->add_option("--criteria", criteria, "Criteria to run (default: all but 7)")
      ->delimiter(',')
      ->check(CLI::Range(1, 9));
  verify->add_option("--out,--work-dir", work_dir, "Scratch directory");
  verify->add_option("--preset", preset_config, "Preset checked for launchability")
      ->check(CLI::ExistingFile);
  verify->add_option("--threads", verify_threads, "Worker threads for planning")
      ->check(CLI::Range(1, 256));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  if (quiet) dlgpd_set_log_level(2);

  if (*latents) {
    return finish(dlgpd_export_latents(checkpoint.c_str(), rollouts.c_str(), limit,
                                       or_null(trial), out.c_str()));
  }
  if (*verify) {
    dlgpd_verify_options opts;
    dlgpd_verify_options_init(&opts);
    opts.seed = verify_seed;
    if (!criteria.empty()) {
      opts.criteria = criteria.data();
      opts.num_criteria = criteria.size();
    }
    opts.work_dir = work_dir.c_str();
    opts.preset_config = or_null(preset_config);
    opts.threads = verify_threads;
    opts.on_result = print_result;
    int passed = 0, failed = 0;
    const int rc = finish(dlgpd_verify(&opts, &passed, &failed));
    if (rc != 0) return rc;
    std::printf("%d passed, %d failed\n", passed, failed);
    return failed == 0 ? 0 : kRuntimeError;
  }

  Config cfg;
  if (!cfg.build(flags)) return kUsageError;
  if (*print) {
    char* text = nullptr;
    const int rc = finish(dlgpd_config_to_json(cfg.get(), &text));
    if (rc == 0) std::printf("%s\n", text);
    dlgpd_string_free(text);
    return rc;
  }
  if (*collect) return finish(dlgpd_collect(cfg.get(), out.c_str()));
  if (*train) return finish(dlgpd_train(cfg.get(), out.c_str(), model_index));
  if (*control) {
    return finish(dlgpd_eval_control(cfg.get(), out.c_str(), or_null(variant), subset));
  }
  if (*transfer) {
    return finish(dlgpd_transfer(cfg.get(), out.c_str(), or_null(variant), subset));
  }
  return kUsageError;
}
