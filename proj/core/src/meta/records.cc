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

#include "metaunlearn/meta/records.h"

#include <fstream>
#include <sstream>

#include "metaunlearn/common/errors.h"
#include "metaunlearn/common/format.h"

namespace metaunlearn::meta {

std::string record_csv_row(const MetaStepRecord& r) {
  std::ostringstream os;
  os << r.step << ',' << format_double(r.l_unlearn) << ','
     << format_double(r.l_meta) << ',' << format_double(r.grad_norm_sq_ft) << ','
     << format_double(r.inner_product_norm) << ',' << format_double(r.wall_ms);
  return os.str();
}

void write_records_csv(const std::filesystem::path& path,
                       std::span<const MetaStepRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kRecordsHeader << '\n';
  for (const MetaStepRecord& r : records) out << record_csv_row(r) << '\n';
}

std::vector<MetaStepRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kRecordsHeader) {
    throw InvalidArgument(path.string() + ": unexpected header");
  }
  std::vector<MetaStepRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    MetaStepRecord r;
    char sep = 0;
    row >> r.step >> sep >> r.l_unlearn >> sep >> r.l_meta >> sep >>
        r.grad_norm_sq_ft >> sep >> r.inner_product_norm >> sep >> r.wall_ms;
    if (!row) throw InvalidArgument(path.string() + ": malformed row '" + line + "'");
    out.push_back(r);
  }
  return out;
}

}  // namespace metaunlearn::meta
