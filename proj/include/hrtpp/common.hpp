#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hrtpp {

// Error categories map onto CLI exit codes: validation 2, IO 3, numeric 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    [[nodiscard]] virtual int exit_code() const noexcept { return 1; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    [[nodiscard]] int exit_code() const noexcept override { return 2; }
};

class IoError : public Error {
public:
    using Error::Error;
    [[nodiscard]] int exit_code() const noexcept override { return 3; }
};

class NumericError : public Error {
public:
    using Error::Error;
    [[nodiscard]] int exit_code() const noexcept override { return 4; }
};

// Syntax error in the rule DSL; offset is a byte position into the source line.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : ValidationError(msg + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// splitmix64 finalizer; the standard scramble for seed derivation.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-item seed derivation: every sequence/run owns an independent stream
// reproducible from (master seed, index) alone.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(master ^ splitmix64(index + 1));
}

// FNV-1a over raw bytes; stable across platforms, used for file fingerprints.
[[nodiscard]] constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

[[nodiscard]] std::string hex64(std::uint64_t value);

// Runs f(i) for i in [0, n) across worker threads. Callers write results into
// preallocated per-index slots and reduce serially, so totals are independent
// of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f,
                  unsigned num_threads = 0);

} // namespace hrtpp
