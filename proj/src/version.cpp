#include "ionbath/version.hpp"

#include <cstdio>

namespace ionbath {

std::string hex_hash(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace ionbath
