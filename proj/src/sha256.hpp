#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace lsi {

// Incremental SHA-256 used for checkpoint checksums and content hashes.
class Sha256 {
  public:
    Sha256() { reset(); }

    void reset();
    void update(const void *data, size_t len);
    std::array<uint8_t, 32> digest(); // finalizes; call once per message

    static std::array<uint8_t, 32> hash(const void *data, size_t len);
    static std::string hex(const void *data, size_t len); // 64-char lowercase hex

  private:
    void process_block(const uint8_t *block);

    uint32_t state_[8];
    uint64_t total_len_ = 0;
    uint8_t buffer_[64];
    size_t buffer_len_ = 0;
};

std::string to_hex(const std::array<uint8_t, 32> &digest);

} // namespace lsi
