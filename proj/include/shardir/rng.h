/* Copyright 2026 The Shardir Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef SHARDIR_RNG_H_
#define SHARDIR_RNG_H_

#include <cmath>
#include <cstdint>
#include <string>

namespace shardir {

// Counter-based generator: every draw is a pure function of (seed, keys...),
// so results are independent of evaluation order and thread count.

inline uint64_t MixBits(uint64_t x) {
  // splitmix64 finalizer.
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t HashCombine(uint64_t a, uint64_t b) {
  return MixBits(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// FNV-1a; stable across platforms, unlike std::hash.
inline uint64_t HashString(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform in [0, 1).
inline double UniformDouble(uint64_t seed, uint64_t k1, uint64_t k2,
                            uint64_t k3 = 0) {
  uint64_t h = MixBits(HashCombine(HashCombine(HashCombine(seed, k1), k2), k3));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two keyed uniforms.
inline double NormalDouble(uint64_t seed, uint64_t k1, uint64_t k2) {
  double u1 = UniformDouble(seed, k1, k2, 1);
  double u2 = UniformDouble(seed, k1, k2, 2);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace shardir

#endif  // SHARDIR_RNG_H_
