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


#ifndef METAUNLEARN_TOOLS_CLI_MANIFEST_H_
#define METAUNLEARN_TOOLS_CLI_MANIFEST_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace metaunlearn::cli {

inline constexpr const char* kManifestSchema = "metaunlearn.manifest";
inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";

std::string sha1_hex(std::string_view bytes);

// Git blob address: SHA-1 of "blob <size>\0" followed by the bytes.
std::string git_blob_address(std::string_view bytes);

// Address of a file. Named CSV columns are removed before hashing so that
// timing columns do not perturb the address.
std::string content_address(const std::filesystem::path& path,
                            const std::vector<std::string>& drop_columns = {});

struct ArtifactRef {
  std::string path;  // relative to the run root
  std::string address;
  std::vector<std::string> drop_columns;
};

struct StageEntry {
  std::map<std::string, ArtifactRef> files;
  double wall_ms = 0.0;
};

struct RunManifest {
  std::string config_hash;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> versions;
  std::map<std::string, StageEntry> stages;

  const StageEntry* stage(const std::string& name) const;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// Returns nullopt when the run root has no manifest yet.
std::optional<RunManifest> load_manifest(const std::filesystem::path& root);
void save_manifest(const std::filesystem::path& root, const RunManifest& m);

// Records `relative` (under `root`) with its current content address.
ArtifactRef make_ref(const std::filesystem::path& root, const std::string& relative,
                     std::vector<std::string> drop_columns = {});

// Problems found when checking every file of `entry` against its address.
std::vector<std::string> verify_stage(const std::filesystem::path& root,
                                      const StageEntry& entry);
std::vector<std::string> verify_manifest(const std::filesystem::path& root,
                                         const RunManifest& m);

}  // namespace metaunlearn::cli

#endif  // METAUNLEARN_TOOLS_CLI_MANIFEST_H_
