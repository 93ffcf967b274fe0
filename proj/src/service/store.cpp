#include "epimob/service/store.hpp"

#include "epimob/error.hpp"
#include "epimob/hash.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace epimob::service {

namespace {

constexpr char kMagic[4] = {'E', 'P', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeader = 4 + 4 + 8 + 4;

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::string_view in, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

bool valid_part(std::string_view s) {
    if (s.empty() || s == "." || s == "..") return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
               c == '.';
    });
}

std::pair<std::string, std::string> split_key(const std::string& key) {
    const auto slash = key.find('/');
    if (slash == std::string::npos) throw InvalidInput("store key must be <space>/<id>: '" + key + "'");
    auto space = key.substr(0, slash);
    auto id = key.substr(slash + 1);
    if (!valid_part(space) || !valid_part(id)) throw InvalidInput("invalid store key '" + key + "'");
    return {space, id};
}

[[noreturn]] void io_error(const std::string& what, const std::filesystem::path& p) {
    throw std::runtime_error(what + " " + p.string() + ": " + std::strerror(errno));
}

} // namespace

KvStore::KvStore(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

std::filesystem::path KvStore::path_of(const std::string& key) const {
    const auto [space, id] = split_key(key);
    return dir_ / space / (id + ".rec");
}

std::string KvStore::encode(std::string_view payload) {
    std::string out(kMagic, 4);
    put_le(out, kVersion, 4);
    put_le(out, payload.size(), 8);
    put_le(out, crc32_of(payload), 4);
    out.append(payload);
    return out;
}

std::string KvStore::decode(std::string_view record, const std::string& what) {
    if (record.size() < kHeader) throw IntegrityError(what + ": record truncated inside the header");
    if (record.substr(0, 4) != std::string_view(kMagic, 4)) throw IntegrityError(what + ": bad record magic");
    if (get_le(record, 4, 4) != kVersion) throw IntegrityError(what + ": unsupported record version");
    const auto length = get_le(record, 8, 8);
    if (length != record.size() - kHeader)
        throw IntegrityError(what + ": length mismatch (header says " + std::to_string(length) + " bytes, found " +
                             std::to_string(record.size() - kHeader) + ")");
    const auto payload = record.substr(kHeader);
    const auto expected = static_cast<std::uint32_t>(get_le(record, 16, 4));
    const auto actual = crc32_of(payload);
    if (expected != actual) {
        std::ostringstream msg;
        msg << what << ": checksum mismatch (stored " << std::hex << expected << ", computed " << actual << ")";
        throw IntegrityError(msg.str());
    }
    return std::string(payload);
}

void KvStore::put(const std::string& key, std::string_view value) {
    const auto target = path_of(key);
    const auto record = encode(value);
    std::lock_guard lock(write_mutex_);
    std::filesystem::create_directories(target.parent_path());
    const auto tmp = target.parent_path() / ("." + target.filename().string() + ".tmp" + std::to_string(::getpid()) +
                                             "-" + std::to_string(tmp_counter_++));
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) io_error("cannot create", tmp);
    std::size_t written = 0;
    while (written < record.size()) {
        const auto n = ::write(fd, record.data() + written, record.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            io_error("cannot write", tmp);
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        io_error("cannot sync", tmp);
    }
    ::close(fd);
    std::filesystem::rename(tmp, target);
}

std::optional<std::string> KvStore::get(const std::string& key) const {
    const auto p = path_of(key);
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return decode(buf.str(), key);
}

bool KvStore::contains(const std::string& key) const { return std::filesystem::exists(path_of(key)); }

bool KvStore::remove(const std::string& key) {
    std::lock_guard lock(write_mutex_);
    return std::filesystem::remove(path_of(key));
}

std::vector<std::string> KvStore::ids(const std::string& space) const {
    if (!valid_part(space)) throw InvalidInput("invalid store space '" + space + "'");
    std::vector<std::string> out;
    const auto d = dir_ / space;
    if (!std::filesystem::is_directory(d)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(d)) {
        const auto name = entry.path().filename().string();
        if (name.starts_with(".") || entry.path().extension() != ".rec") continue;
        out.push_back(entry.path().stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace epimob::service
