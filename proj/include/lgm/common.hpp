#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lgm {

/// Representable "infinite" information distance. Any pairwise joint whose
/// determinant magnitude falls below kDetEps maps to this value, which keeps
/// the distance arithmetic total and sort-stable.
inline constexpr double kDCap = 50.0;
inline constexpr double kDetEps = 1e-12;

/// Thrown when an exact-inference request exceeds the induced-width cap.
class WidthCapError : public std::runtime_error {
public:
    explicit WidthCapError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when an input artifact (JSON/CSV) cannot be parsed.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown by randomized generators that exhaust their retry budget.
class GenerationError : public std::runtime_error {
public:
    explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

/// splitmix64 step; used to derive independent seed streams from
/// (master seed, label...) tuples so that every cell of a sweep is
/// reproducible in isolation.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t s = mix_seed(master ^ 0xd1b54a32d192ed03ULL);
    s = mix_seed(s ^ a);
    s = mix_seed(s ^ b);
    s = mix_seed(s ^ c);
    return s;
}

}  // namespace lgm
