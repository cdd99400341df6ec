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

/* The public header must compile as C; exercises a few calls. */
#include <stdio.h>
#include <string.h>

#include "dlgpd/dlgpd.h"

int main(void) {
  dlgpd_config* cfg = NULL;
  char* json = NULL;
  if (dlgpd_config_create(&cfg) != DLGPD_OK) return 1;
  if (dlgpd_config_set(cfg, "train.epochs=5") != DLGPD_OK) return 1;
  if (dlgpd_config_set(cfg, "train.bogus=5") != DLGPD_ERR_INVALID_ARGUMENT) return 1;
  if (strstr(dlgpd_last_error(), "train.bogus") == NULL) return 1;
  if (dlgpd_config_to_json(cfg, &json) != DLGPD_OK) return 1;
  if (strstr(json, "\"epochs\": 5") == NULL) return 1;
  dlgpd_string_free(json);
  dlgpd_config_free(cfg);
  printf("dlgpd %s\n", dlgpd_version());
  return 0;
}
