#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epimob::service {

// Embedded on-disk key-value store. A key is "<space>/<id>" and maps to one
// file <dir>/<space>/<id>.rec holding a single record:
//
//   "EPMB" | u32 version | u64 payload length | u32 crc32(payload) | payload
//
// (integers little-endian). Writes go to a temporary file that is synced and
// renamed over the target, so readers see either the old or the new record.
class KvStore {
public:
    explicit KvStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }

    void put(const std::string& key, std::string_view value);
    // nullopt when absent; IntegrityError when the record is damaged.
    std::optional<std::string> get(const std::string& key) const;
    bool contains(const std::string& key) const;
    bool remove(const std::string& key);
    // Ids stored under a space, sorted.
    std::vector<std::string> ids(const std::string& space) const;

    std::filesystem::path path_of(const std::string& key) const;

    static std::string encode(std::string_view payload);
    // Throws IntegrityError naming `what` on any mismatch.
    static std::string decode(std::string_view record, const std::string& what);

private:
    std::filesystem::path dir_;
    mutable std::mutex write_mutex_;
    unsigned long long tmp_counter_ = 0;
};

} // namespace epimob::service
