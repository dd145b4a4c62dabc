#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace chorus {

// FNV-1a, 64 bit. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

/// 16 lower-case hex digits of fnv1a64(data).
std::string hex_digest(std::string_view data);

} // namespace chorus
