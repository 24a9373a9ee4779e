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


#include "cli/manifest.h"

#include <openssl/sha.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "metaunlearn/common/errors.h"

namespace metaunlearn::cli {
namespace {

using nlohmann::json;

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string drop_csv_columns(const std::string& text,
                             const std::vector<std::string>& columns) {
  std::istringstream in(text);
  std::string line;
  std::vector<bool> keep;
  std::string out;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') {
      out += line + "\n";
      continue;
    }
    auto cells = split(line, ',');
    if (header) {
      for (const auto& c : cells) {
        keep.push_back(std::find(columns.begin(), columns.end(), c) ==
                       columns.end());
      }
      header = false;
    }
    std::string row;
    bool first = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i < keep.size() && !keep[i]) continue;
      if (!first) row += ',';
      row += cells[i];
      first = false;
    }
    out += row + "\n";
  }
  return out;
}

}  // namespace

std::string sha1_hex(std::string_view bytes) {
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out += kHex[b >> 4];
    out += kHex[b & 0xf];
  }
  return out;
}

std::string git_blob_address(std::string_view bytes) {
  std::string blob = "blob " + std::to_string(bytes.size());
  blob.push_back('\0');
  blob.append(bytes);
  return sha1_hex(blob);
}

std::string content_address(const std::filesystem::path& path,
                            const std::vector<std::string>& drop_columns) {
  std::string bytes = read_bytes(path);
  if (!drop_columns.empty()) bytes = drop_csv_columns(bytes, drop_columns);
  return git_blob_address(bytes);
}

const StageEntry* RunManifest::stage(const std::string& name) const {
  auto it = stages.find(name);
  return it == stages.end() ? nullptr : &it->second;
}

json manifest_to_json(const RunManifest& m) {
  json stages = json::object();
  for (const auto& [name, entry] : m.stages) {
    json files = json::object();
    for (const auto& [key, ref] : entry.files) {
      json f = {{"path", ref.path}, {"address", ref.address}};
      if (!ref.drop_columns.empty()) f["address_excludes"] = ref.drop_columns;
      files[key] = f;
    }
    stages[name] = {{"files", files}, {"wall_ms", entry.wall_ms}};
  }
  return {{"schema", kManifestSchema},
          {"version", kManifestVersion},
          {"config_hash", m.config_hash},
          {"config", m.config},
          {"versions", m.versions},
          {"stages", stages}};
}

RunManifest manifest_from_json(const json& j) {
  if (j.value("schema", std::string()) != kManifestSchema) {
    throw InvalidArgument("manifest: unexpected schema");
  }
  if (j.value("version", 0) != kManifestVersion) {
    throw InvalidArgument("manifest: unsupported version");
  }
  RunManifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.config = j.at("config");
  m.versions = j.at("versions").get<std::map<std::string, std::string>>();
  for (const auto& [name, s] : j.at("stages").items()) {
    StageEntry entry;
    entry.wall_ms = s.value("wall_ms", 0.0);
    for (const auto& [key, f] : s.at("files").items()) {
      entry.files[key] = {f.at("path").get<std::string>(),
                          f.at("address").get<std::string>(),
                          f.value("address_excludes", std::vector<std::string>{})};
    }
    m.stages[name] = std::move(entry);
  }
  return m;
}

std::optional<RunManifest> load_manifest(const std::filesystem::path& root) {
  auto path = root / kManifestFile;
  if (!std::filesystem::exists(path)) return std::nullopt;
  return manifest_from_json(json::parse(read_bytes(path)));
}

void save_manifest(const std::filesystem::path& root, const RunManifest& m) {
  std::filesystem::create_directories(root);
  auto tmp = root / (std::string(kManifestFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    out << manifest_to_json(m).dump(2) << "\n";
    if (!out) throw InvalidArgument("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, root / kManifestFile);
}

ArtifactRef make_ref(const std::filesystem::path& root, const std::string& relative,
                     std::vector<std::string> drop_columns) {
  return {relative, content_address(root / relative, drop_columns),
          std::move(drop_columns)};
}

std::vector<std::string> verify_stage(const std::filesystem::path& root,
                                      const StageEntry& entry) {
  std::vector<std::string> problems;
  for (const auto& [key, ref] : entry.files) {
    auto path = root / ref.path;
    if (!std::filesystem::exists(path)) {
      problems.push_back(ref.path + ": missing");
      continue;
    }
    if (content_address(path, ref.drop_columns) != ref.address) {
      problems.push_back(ref.path + ": content address mismatch");
    }
  }
  return problems;
}

std::vector<std::string> verify_manifest(const std::filesystem::path& root,
                                         const RunManifest& m) {
  std::vector<std::string> problems;
  for (const auto& [name, entry] : m.stages) {
    for (auto& p : verify_stage(root, entry)) problems.push_back(name + "/" + p);
  }
  return problems;
}

}  // namespace metaunlearn::cli
