#pragma once

#include <cstdint>
#include <string_view>

namespace red {

/// 64-bit FNV-1a; stable across platforms and runs.
constexpr std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Component seed: master XOR stable_hash(component name).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view component) {
  return master ^ stable_hash(component);
}

}  // namespace red
