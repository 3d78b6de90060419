#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pdfest {

// splitmix64 finalizer; used to decorrelate seed streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic stream derivation: every (base seed, tag...) tuple owns an
// independent generator, so parallel schedules cannot change the draws that
// a given sample index sees.
inline std::mt19937_64 make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(base);
  for (std::uint64_t t : tags) s = mix64(s ^ mix64(t));
  return std::mt19937_64(s);
}

inline std::mt19937_64 make_rng(std::uint64_t base) { return make_rng(base, {}); }

}  // namespace pdfest
