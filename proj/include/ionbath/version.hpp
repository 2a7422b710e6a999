#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ionbath {

inline constexpr const char* toolkit_version = "0.1.0";

// FNV-1a 64-bit, used to stamp emitted files with a configuration hash.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex_hash(std::uint64_t h);

}  // namespace ionbath
