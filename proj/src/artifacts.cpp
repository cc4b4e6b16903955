#include "vtrack/artifacts.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <utility>
#include <vector>

#include "vtrack/errors.hpp"

namespace vtrack {

namespace fs = std::filesystem;

void ArtifactSet::add(const std::string& relative_path, std::string content) {
  require(!relative_path.empty() && fs::path(relative_path).is_relative(), "artifact paths must be relative");
  files_[relative_path] = std::move(content);
}

void ArtifactSet::commit(const fs::path& directory) const {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create output directory '" + directory.string() + "': " + ec.message());
  // Stage every file before renaming any of them.
  std::vector<std::pair<fs::path, fs::path>> staged;
  const auto discard = [&] {
    std::error_code ignore;
    for (const auto& [tmp, _] : staged) fs::remove(tmp, ignore);
  };
  for (const auto& [rel, content] : files_) {
    const fs::path target = directory / rel;
    fs::create_directories(target.parent_path(), ec);
    if (ec) {
      discard();
      throw IoError("cannot create '" + target.parent_path().string() + "': " + ec.message());
    }
    fs::path tmp = target;
    tmp += ".tmp";
    staged.emplace_back(tmp, target);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      discard();
      throw IoError("cannot write '" + target.string() + "'");
    }
  }
  for (const auto& [tmp, target] : staged) {
    fs::rename(tmp, target, ec);
    if (ec) {
      discard();
      throw IoError("cannot move '" + target.string() + "' into place");
    }
  }
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw NumericError("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

}  // namespace vtrack
