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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlgpd/dlgpd.h"

namespace {

void print_line(int, int, const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DLGPD acceptance checks"};
  std::vector<int> criteria;
  std::string work_dir = "acceptance_work";
  std::string preset_config;
  unsigned long long seed = 0;
  bool verbose = false;
  app.add_option("--criteria", criteria, "Comma-separated criterion ids")
      ->delimiter(',')
      ->check(CLI::Range(1, 9));
  app.add_option("--work-dir", work_dir, "Scratch directory");
  app.add_option("--preset", preset_config, "Full-scale preset")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed");
  app.add_flag("-v,--verbose", verbose, "Show progress");
  CLI11_PARSE(app, argc, argv);

  if (!verbose) dlgpd_set_log_level(2);
  dlgpd_verify_options opts;
  dlgpd_verify_options_init(&opts);
  opts.seed = seed;
  if (!criteria.empty()) {
    opts.criteria = criteria.data();
    opts.num_criteria = criteria.size();
  }
  opts.work_dir = work_dir.c_str();
  opts.preset_config = preset_config.empty() ? nullptr : preset_config.c_str();
  opts.on_result = print_line;
  int passed = 0, failed = 0;
  const dlgpd_status s = dlgpd_verify(&opts, &passed, &failed);
  if (s != DLGPD_OK) {
    std::fprintf(stderr, "acceptance: %s\n", dlgpd_last_error());
    return 2;
  }
  std::printf("%d passed, %d failed\n", passed, failed);
  return failed == 0 ? 0 : 1;
}
