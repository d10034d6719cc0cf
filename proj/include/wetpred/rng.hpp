#pragma once

#include <cstdint>
#include <random>

namespace wetpred {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a path of
/// stream identifiers, e.g. derive_seed(master, repeat, fold). Every random
/// decision in the toolkit hangs off one master seed through this function,
/// so parallel and serial execution consume identical streams.
template <typename... Ids>
constexpr std::uint64_t derive_seed(std::uint64_t master, Ids... ids) noexcept {
  std::uint64_t s = mix64(master);
  ((s = mix64(s ^ mix64(static_cast<std::uint64_t>(ids) + 0x632be59bd9b4e019ULL))), ...);
  return s;
}

} // namespace wetpred
