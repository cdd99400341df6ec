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
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dlgpd/dlgpd.h"
#include "test_util.h"

namespace {

class Config {
 public:
  Config() { EXPECT_EQ(dlgpd_config_create(&cfg_), DLGPD_OK); }
  ~Config() { dlgpd_config_free(cfg_); }
  dlgpd_config* get() { return cfg_; }

 private:
  dlgpd_config* cfg_ = nullptr;
};

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STREQ(dlgpd_version(), "1.0.0");
  EXPECT_STREQ(dlgpd_status_string(DLGPD_OK), "ok");
  EXPECT_STREQ(dlgpd_status_string(DLGPD_ERR_IO), "i/o error");
}

TEST(CApi, NullArgumentsReportInvalidArgument) {
  EXPECT_EQ(dlgpd_config_create(nullptr), DLGPD_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(dlgpd_last_error()).find("NULL"), std::string::npos);
  EXPECT_EQ(dlgpd_config_set(nullptr, "seed=1"), DLGPD_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(dlgpd_collect(nullptr, "/tmp"), DLGPD_ERR_INVALID_ARGUMENT);
  dlgpd_config_free(nullptr);
  dlgpd_model_free(nullptr);
}

TEST(CApi, ConfigMergeAndErrors) {
  Config c;
  EXPECT_EQ(dlgpd_config_merge_json(c.get(), R"({"train": {"epochs": 9}})"), DLGPD_OK);
  EXPECT_EQ(dlgpd_config_merge_json(c.get(), R"({"train": {"epochz": 9}})"),
            DLGPD_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(dlgpd_last_error()).find("train.epochz"), std::string::npos);
  EXPECT_EQ(dlgpd_config_merge_json(c.get(), "{oops"), DLGPD_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(dlgpd_config_merge_file(c.get(), "/nonexistent/x.json"), DLGPD_ERR_IO);
  EXPECT_EQ(dlgpd_config_set_seed(c.get(), 77), DLGPD_OK);
  char* text = nullptr;
  ASSERT_EQ(dlgpd_config_to_json(c.get(), &text), DLGPD_OK);
  const std::string s(text);
  dlgpd_string_free(text);
  EXPECT_NE(s.find("\"epochs\": 9"), std::string::npos);
  EXPECT_NE(s.find("\"seed\": 77"), std::string::npos);
  // Validation happens when the configuration is used.
  EXPECT_EQ(dlgpd_config_set(c.get(), "eval.models=10"), DLGPD_OK);
  EXPECT_EQ(dlgpd_config_to_json(c.get(), &text), DLGPD_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(text, nullptr);
}

TEST(CApi, MissingCheckpointIsIoError) {
  dlgpd_model* m = nullptr;
  EXPECT_EQ(dlgpd_model_load("/nonexistent/model.ckpt", &m), DLGPD_ERR_IO);
  EXPECT_EQ(m, nullptr);
}

struct Captured {
  std::vector<std::string> lines;
};

void capture(int, const char* msg, void* user) {
  static_cast<Captured*>(user)->lines.emplace_back(msg);
}

TEST(CApi, TinyPipelineEndToEnd) {
  dlgpd::testing::TempDir dir;
  const std::string ws = dir.path().string();
  Captured log;
  dlgpd_set_log_callback(capture, &log);
  Config c;
  for (const char* a :
       {"model.arch=tiny", "data.train_rollouts=3", "data.rollout_len=5", "data.pools=1",
        "data.pool_size=2", "data.variants=[\"original\",\"inverted-action\"]",
        "train.epochs=2", "train.batch_size=6", "train.models=1", "planner.horizon=3",
        "planner.population=8", "planner.elites=2", "planner.iterations=1",
        "planner.reward_samples=1", "eval.episode_len=3", "eval.subset_sizes=[2]",
        "eval.models=1", "eval.pools=1", "eval.trials=1"}) {
    ASSERT_EQ(dlgpd_config_set(c.get(), a), DLGPD_OK) << a << ": " << dlgpd_last_error();
  }
  ASSERT_EQ(dlgpd_collect(c.get(), ws.c_str()), DLGPD_OK) << dlgpd_last_error();
  EXPECT_EQ(dlgpd_eval_control(c.get(), ws.c_str(), "original", 2), DLGPD_ERR_IO);
  ASSERT_EQ(dlgpd_train(c.get(), ws.c_str(), -1), DLGPD_OK) << dlgpd_last_error();
  EXPECT_EQ(dlgpd_train(c.get(), ws.c_str(), 3), DLGPD_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(dlgpd_eval_control(c.get(), ws.c_str(), nullptr, 0), DLGPD_OK) << dlgpd_last_error();
  ASSERT_EQ(dlgpd_transfer(c.get(), ws.c_str(), nullptr, 2), DLGPD_OK) << dlgpd_last_error();
  EXPECT_EQ(dlgpd_transfer(c.get(), ws.c_str(), "sideways", 2), DLGPD_ERR_INVALID_ARGUMENT);

  const std::string ckpt = ws + "/models/model_0/model.ckpt";
  const std::string tsv = ws + "/latents.tsv";
  const std::string trial = ws + "/results/control/original/2/trial_0.json";
  ASSERT_EQ(dlgpd_export_latents(ckpt.c_str(), (ws + "/data/train").c_str(), 1, trial.c_str(),
                                 tsv.c_str()),
            DLGPD_OK)
      << dlgpd_last_error();
  EXPECT_TRUE(std::filesystem::exists(tsv));

  dlgpd_model* m = nullptr;
  ASSERT_EQ(dlgpd_model_load(ckpt.c_str(), &m), DLGPD_OK);
  const double s[3] = {0.1, 0.2, 0.3};
  double mean[3], var[3], reward = 0;
  EXPECT_EQ(dlgpd_model_predict(m, s, 0.5, mean, var, &reward), DLGPD_ERR_STATE);
  ASSERT_EQ(dlgpd_model_condition(m, (ws + "/data/pools/original/pool_0").c_str(), 0, 5),
            DLGPD_OK);
  ASSERT_EQ(dlgpd_model_predict(m, s, 0.5, mean, var, &reward), DLGPD_OK);
  EXPECT_TRUE(std::isfinite(mean[0]) && var[2] > 0 && std::isfinite(reward));
  int epoch = 0;
  EXPECT_EQ(dlgpd_model_epoch(m, &epoch), DLGPD_OK);
  EXPECT_EQ(epoch, 2);
  std::uint64_t hash = 0;
  EXPECT_EQ(dlgpd_model_hash(m, &hash), DLGPD_OK);
  EXPECT_NE(hash, 0u);
  dlgpd_model_free(m);

  dlgpd_set_log_callback(nullptr, nullptr);
  EXPECT_FALSE(log.lines.empty());
}

TEST(CApi, VerifySingleCriterion) {
  dlgpd::testing::TempDir dir;
  dlgpd_verify_options o;
  dlgpd_verify_options_init(&o);
  const int ids[] = {3};
  o.criteria = ids;
  o.num_criteria = 1;
  const std::string wd = dir.path().string();
  o.work_dir = wd.c_str();
  std::vector<std::string> lines;
  o.on_result = [](int, int, const char* line, void* user) {
    static_cast<std::vector<std::string>*>(user)->emplace_back(line);
  };
  o.user = &lines;
  dlgpd_set_log_level(3);
  int passed = 0, failed = 0;
  ASSERT_EQ(dlgpd_verify(&o, &passed, &failed), DLGPD_OK);
  dlgpd_set_log_level(1);
  EXPECT_EQ(passed, 1);
  EXPECT_EQ(failed, 0);
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0].rfind("PASS [3]", 0), 0u);
  const int bad[] = {12};
  o.criteria = bad;
  EXPECT_EQ(dlgpd_verify(&o, &passed, &failed), DLGPD_ERR_INVALID_ARGUMENT);
}

}  // namespace
