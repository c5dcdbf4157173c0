// Copyright 2026 The gatekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GATEKIT__RANDOM_HPP_
#define GATEKIT__RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace gatekit
{

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// FNV-1a; stable across platforms, used to key streams by scene id.
constexpr std::uint64_t hash_string(std::string_view s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Standard normal; the libstdc++ normal_distribution caches a second draw,
/// so a fresh distribution per call keeps streams position-independent.
inline double gaussian(Rng & rng, double stddev)
{
  if (stddev <= 0.0) {
    return 0.0;
  }
  std::normal_distribution<double> dist(0.0, stddev);
  return dist(rng);
}

/// Gaussian redrawn until it lies within `bound_sigmas` standard deviations.
inline double truncated_gaussian(Rng & rng, double stddev, double bound_sigmas = 4.0)
{
  if (stddev <= 0.0) {
    return 0.0;
  }
  for (;;) {
    const double v = gaussian(rng, stddev);
    if (v >= -bound_sigmas * stddev && v <= bound_sigmas * stddev) {
      return v;
    }
  }
}

inline double uniform(Rng & rng, double lo, double hi)
{
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

}  // namespace gatekit

#endif  // GATEKIT__RANDOM_HPP_
