#pragma once

#include <cstdint>
#include <random>

namespace pdfmidas {

//! splitmix64 mixing step. Used to derive well-separated child seeds from a
//! master seed so that replication r of a study gets the same stream no
//! matter how many replications run before it (or on which thread).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

//! Deterministic child seed for stream `index` under `master`.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 1));
}

//! Engine used throughout; seeded explicitly, never from the clock.
inline std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace pdfmidas
