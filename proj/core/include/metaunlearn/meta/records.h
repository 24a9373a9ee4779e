// Copyright 2026 The MetaUnlearn Authors.
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

#ifndef METAUNLEARN_META_RECORDS_H_
#define METAUNLEARN_META_RECORDS_H_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace metaunlearn::meta {

// One outer step of meta-unlearning.
struct MetaStepRecord {
  int step = 0;
  double l_unlearn = 0.0;
  double l_meta = 0.0;
  double grad_norm_sq_ft = 0.0;
  // Inner product of the unit-normalized forget-finetune and retain gradients.
  double inner_product_norm = 0.0;
  double wall_ms = 0.0;
};

inline constexpr const char* kRecordsHeader =
    "step,l_unlearn,l_meta,grad_norm_sq_ft,inner_product_norm,wall_ms";

std::string record_csv_row(const MetaStepRecord& r);
void write_records_csv(const std::filesystem::path& path,
                       std::span<const MetaStepRecord> records);
std::vector<MetaStepRecord> read_records_csv(const std::filesystem::path& path);

}  // namespace metaunlearn::meta

#endif  // METAUNLEARN_META_RECORDS_H_
