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

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dlgpd/config.h"
#include "test_util.h"

#ifndef DLGPD_SOURCE_DIR
#error "DLGPD_SOURCE_DIR must point at the repository root"
#endif

namespace dlgpd::config {
namespace {

const std::filesystem::path kRoot = DLGPD_SOURCE_DIR;

TEST(Defaults, RoundTripThroughJson) {
  const RunConfig c = RunConfig::from_json(defaults());
  EXPECT_EQ(c.to_json(), defaults());
  EXPECT_EQ(c.train.epochs, 2000);
  EXPECT_EQ(c.train.batch_size, 1024);
  EXPECT_EQ(c.planner.horizon, 20);
  EXPECT_EQ(c.eval.subset_sizes, (std::vector<int>{10, 20, 50, 100, 200}));
}

TEST(Presets, FullScalePresetEqualsDefaults) {
  EXPECT_EQ(merge_strict(defaults(), read_json(kRoot / "configs" / "paper.json")), defaults());
}

TEST(Presets, DeskPresetIsValidAndSmaller) {
  const RunConfig c = load(kRoot / "configs" / "desk.json", {});
  EXPECT_EQ(c.data.train_rollouts, 50);
  EXPECT_EQ(c.train.epochs, 300);
  EXPECT_EQ(c.train.batch_size, 256);
}

TEST(Merge, UnknownKeysRejectedWithPath) {
  nlohmann::json overlay = {{"train", {{"epoch", 3}}}};
  try {
    merge_strict(defaults(), overlay);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("train.epoch"), std::string::npos);
  }
}

TEST(Assign, ParsesJsonValuesAndStrings) {
  nlohmann::json j = defaults();
  apply_assignment(j, "train.epochs=7");
  apply_assignment(j, "model.arch=tiny");
  apply_assignment(j, "eval.subset_sizes=[1,2]");
  const RunConfig c = RunConfig::from_json(j);
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_EQ(c.arch, "tiny");
  EXPECT_EQ(c.eval.subset_sizes, (std::vector<int>{1, 2}));
  EXPECT_EQ(c.net_arch().image_size, 8);
}

TEST(Assign, RejectsMalformedAndUnknown) {
  nlohmann::json j = defaults();
  EXPECT_THROW(apply_assignment(j, "train.epochs"), Error);
  EXPECT_THROW(apply_assignment(j, "=3"), Error);
  EXPECT_THROW(apply_assignment(j, "train.nope=3"), Error);
  EXPECT_THROW(apply_assignment(j, "train=3"), Error);
}

TEST(Validate, InconsistentValuesRejected) {
  EXPECT_THROW(load(std::nullopt, {"eval.models=5"}), Error);
  EXPECT_THROW(load(std::nullopt, {"eval.subset_sizes=[500]"}), Error);
  EXPECT_THROW(load(std::nullopt, {"data.variants=[\"wind\"]"}), Error);
  EXPECT_THROW(load(std::nullopt, {"model.arch=huge"}), Error);
  EXPECT_THROW(load(std::nullopt, {"train.epochs=\"many\""}), Error);
  EXPECT_THROW(load(std::nullopt, {"planner.elites=600"}), Error);
}

TEST(Seeds, OverrideAndDerivation) {
  const RunConfig a = load(std::nullopt, {}, 5);
  const RunConfig b = load(std::nullopt, {}, 6);
  EXPECT_EQ(a.seed, 5u);
  EXPECT_EQ(a.train.seed, 5u);
  EXPECT_NE(a.derive_seed(1), b.derive_seed(1));
  EXPECT_NE(a.derive_seed(1), a.derive_seed(2));
  EXPECT_EQ(a.derive_seed(3, 1), load(std::nullopt, {}, 5).derive_seed(3, 1));
}

TEST(Files, WriteReadAndErrors) {
  testing::TempDir dir;
  write_json(dir.path() / "sub" / "c.json", defaults());
  EXPECT_EQ(read_json(dir.path() / "sub" / "c.json"), defaults());
  {
    std::ofstream os(dir.path() / "bad.json");
    os << "{not json";
  }
  EXPECT_THROW(read_json(dir.path() / "bad.json"), Error);
  EXPECT_THROW(read_json(dir.path() / "missing.json"), Error);
}

}  // namespace
}  // namespace dlgpd::config
