#include "common.hpp"

#include <fstream>
#include <sstream>

namespace mf {

uint64_t fnv1a64(std::string_view data, uint64_t seed) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string digest_hex(std::string_view data) {
    uint64_t a = fnv1a64(data);
    uint64_t b = fnv1a64(data, 0x9e3779b97f4a7c15ull);
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                  static_cast<unsigned long long>(a),
                  static_cast<unsigned long long>(b));
    return std::string(buf);
}

uint64_t derive_seed(uint64_t base, std::string_view tag) {
    return fnv1a64(tag, base ^ 0xa5a5a5a5deadbeefull);
}

uint64_t Rng::below(uint64_t n) {
    if (n == 0) fail(ErrorKind::Unknown, "Rng::below(0)");
    // rejection sampling keeps the draw unbiased
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % n;
}

double Rng::real() {
    return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot open for write: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) fail(ErrorKind::IoError, "write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::IoError, "rename failed: " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string json_dump_stable(const json& j) {
    // nlohmann::json objects are backed by std::map, so key order is
    // already sorted and stable; fix the indent so files are diff-able.
    return j.dump(2) + "\n";
}

}  // namespace mf
