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

#ifndef DLGPD_VERIFY_H_
#define DLGPD_VERIFY_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace dlgpd::verify {

// Acceptance criteria with independent oracles.
//   1 GP oracle equivalence          6 planner with the true dynamics
//   2 gradient checks                7 desk-scale learning smoke
//   3 closed forms                   8 full-scale preset loads
//   4 reward gradient stop           9 determinism
//   5 transfer symmetry
struct Options {
  std::uint64_t seed = 0;
  std::vector<int> criteria{1, 2, 3, 4, 5, 6, 8, 9};
  // Scratch space for generated data and models (criteria 7 and 9).
  std::filesystem::path work_dir = "verify_work";
  // Preset checked by criterion 8.
  std::filesystem::path preset_config;
  int threads = 1;
  std::function<void(const std::string&)> progress;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<CriterionResult> run(const Options& options);

// "PASS [1] gp-oracle: ... (0.4 s)"
std::string format(const CriterionResult& r);

}  // namespace dlgpd::verify

#endif  // DLGPD_VERIFY_H_
