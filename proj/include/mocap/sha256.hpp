#pragma once

#include <cstdint>
#include <string>

namespace mocap {

// Streaming SHA-256. Content hashes name artifact versions and key the
// pipeline stage cache.
class Sha256 {
 public:
  Sha256() { reset(); }

  void reset();
  void update(const void* data, std::size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }

  // Finalizes and returns the lowercase hex digest. The object must be
  // reset() before reuse.
  std::string hex_digest();

 private:
  void process_block(const std::uint8_t* p);

  std::uint32_t h_[8];
  std::uint64_t bit_len_ = 0;
  std::uint8_t buf_[64];
  std::size_t buf_len_ = 0;
};

std::string sha256_hex(const std::string& data);

}  // namespace mocap
