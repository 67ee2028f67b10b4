// Copyright 2026 The Fedcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDCAL_RANDOM_H_
#define FEDCAL_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedcal {

// All stochastic operations draw from an explicitly seeded engine.
using Rng = std::mt19937_64;

// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent substream seed from a base seed and a coordinate
// path. Distinct paths give unrelated seeds; the result is platform-stable.
constexpr uint64_t DeriveSeed(uint64_t base,
                              std::initializer_list<uint64_t> path) {
  uint64_t state = Mix64(base);
  for (uint64_t coordinate : path) {
    state = Mix64(state ^ Mix64(coordinate + 0x632be59bd9b4e019ULL));
  }
  return state;
}

inline Rng MakeRng(uint64_t seed) { return Rng(seed); }

inline Rng MakeRng(uint64_t base, std::initializer_list<uint64_t> path) {
  return Rng(DeriveSeed(base, path));
}

// Stream tags used when deriving substreams, kept distinct across modules.
enum StreamTag : uint64_t {
  kTagDistDpNoise = 0x11,
  kTagOueReport = 0x12,
  kTagOueGroups = 0x13,
  kTagCounters = 0x14,
  kTagDataGen = 0x21,
  kTagSplit = 0x22,
  kTagCell = 0x23,
  kTagHoldout = 0x24,
  kTagBoundaries = 0x25,
};

}  // namespace fedcal

#endif  // FEDCAL_RANDOM_H_
