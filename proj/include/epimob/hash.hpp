#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace epimob {

// Incremental SHA-256 (OpenSSL backed); hex digest.
class ContentHasher {
public:
    ContentHasher();
    ~ContentHasher();
    ContentHasher(const ContentHasher&) = delete;
    ContentHasher& operator=(const ContentHasher&) = delete;

    void update(std::string_view bytes);
    void update_u64(std::uint64_t v);
    std::string hex_digest();

private:
    void* ctx_;
};

std::string sha256_hex(std::string_view bytes);

std::uint32_t crc32_of(std::string_view bytes);

} // namespace epimob
