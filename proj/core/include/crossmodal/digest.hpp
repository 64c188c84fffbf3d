#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace crossmodal {

/// Streaming SHA-256. Used for dataset/checkpoint content digests and the
/// frozen-model invariance checks.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size);
  void update(const std::string& s) { update(s.data(), s.size()); }
  void update(const std::vector<double>& v) {
    update(v.data(), v.size() * sizeof(double));
  }

  /// Finalizes and returns the lowercase hex digest. The object must not be
  /// updated afterwards.
  std::string hex_digest();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace crossmodal
