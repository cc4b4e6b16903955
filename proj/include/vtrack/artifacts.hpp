#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace vtrack {

/// Files staged in memory and written together. Each file goes to a
/// temporary sibling first and is renamed into place, so a failed run leaves
/// no partial artifacts.
class ArtifactSet {
 public:
  void add(const std::string& relative_path, std::string content);
  bool contains(const std::string& relative_path) const { return files_.contains(relative_path); }
  const std::string& content(const std::string& relative_path) const { return files_.at(relative_path); }
  const std::map<std::string, std::string>& files() const { return files_; }

  void commit(const std::filesystem::path& directory) const;

 private:
  std::map<std::string, std::string> files_;
};

std::string sha256_hex(std::string_view data);

}  // namespace vtrack
