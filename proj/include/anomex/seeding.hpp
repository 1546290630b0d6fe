#pragma once

#include <cstdint>
#include <string_view>

namespace anomex {

// Derives an independent stream seed from a base seed and a stable label, so a
// single user-facing seed can drive every randomized step.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace anomex
