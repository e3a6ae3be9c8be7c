#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mf {

using json = nlohmann::json;

enum class ErrorKind : int {
    // keep in sync with the MF_E_* codes in metaflow.h
    Unknown = 1,
    Syntax = 10,
    UnknownNodeKind = 11,
    DanglingReference = 12,
    UnboundedLoop = 13,
    InvalidProgram = 14,
    BudgetExceeded = 20,
    BackendError = 21,
    ExtractionFailed = 22,
    TransportError = 30,
    RateLimited = 31,
    AuthError = 32,
    ScriptMiss = 33,
    MalformedOutput = 34,
    FormatError = 40,
    DuplicateId = 41,
    TooFewTasks = 42,
    BadK = 43,
    EmbedBackendError = 44,
    EmptySubtask = 50,
    ExternalEvaluatorMissing = 51,
    StorageError = 60,
    NoScoredEntry = 61,
    CorruptRun = 62,
    ConfigError = 70,
    IoError = 71,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

// 128-bit FNV-1a style content digest, hex encoded. Not cryptographic;
// used for cache keys, trace digests and content-addressed filenames.
std::string digest_hex(std::string_view data);

uint64_t fnv1a64(std::string_view data, uint64_t seed = 1469598103934665603ull);

// Derives an independent sub-seed from a base seed and a purpose tag so
// that resumed runs draw identical randomness per phase.
uint64_t derive_seed(uint64_t base, std::string_view tag);

// Deterministic cross-platform RNG helpers (std::shuffle and the
// distribution classes are implementation-defined; these are not).
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}
    uint64_t next() { return engine_(); }
    // uniform in [0, n)
    uint64_t below(uint64_t n);
    // uniform in [0, 1)
    double real();
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

// Atomic file write: write to a sibling temp file then rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

std::string json_dump_stable(const json& j);

}  // namespace mf
