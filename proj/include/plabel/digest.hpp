#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace plabel {

// Incremental SHA-256.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  // Length-prefixed field, so ("ab","c") and ("a","bc") hash differently.
  Sha256& field(std::string_view bytes);
  Sha256& field(std::uint64_t value);

  std::string hex();  // finalizes
  std::uint64_t first_u64();  // finalizes; big-endian first 8 bytes

 private:
  void finish(unsigned char* out);
  void* ctx_;
};

std::string sha256_hex(std::string_view bytes);

// Digest over every regular file below dir: relative path and contents, in
// lexicographic path order.
std::string directory_digest(const std::filesystem::path& dir);

}  // namespace plabel
