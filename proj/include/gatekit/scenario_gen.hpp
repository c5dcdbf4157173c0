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

#ifndef GATEKIT__SCENARIO_GEN_HPP_
#define GATEKIT__SCENARIO_GEN_HPP_

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "gatekit/core.hpp"

namespace gatekit
{

struct SpeedRange
{
  double lo{0.0};
  double hi{0.0};
};

/// Synthetic benchmark configuration. Families:
///   Cruise     constant velocity, optional adjacent-lane traffic
///   Curve      constant speed on a constant-curvature arc
///   LeftTurn   +pi/2 heading sweep with a trapezoidal speed profile
///   CutIn      a neighbor merges ahead; the ego future shifts laterally away
///   HighSpeed  straight motion at the top of the speed range, slower traffic
///   Occlusion  Cruise/Curve motion whose oldest half of history is replaced
///              by zero-velocity placeholder states
struct GeneratorConfig
{
  std::uint64_t seed{42};
  std::map<ScenarioTag, int> counts;
  double noise_position_std{0.05};
  double noise_velocity_std{0.1};
  std::map<ScenarioTag, SpeedRange> speed_ranges;
  Horizons horizons;

  /// 100 scenes per family, default noise and speed ranges.
  static GeneratorConfig defaults();
  /// Every count zero except `tag`.
  static GeneratorConfig single_family(ScenarioTag tag, int count, std::uint64_t seed = 42);

  int total_count() const;
  SpeedRange speed_range(ScenarioTag tag) const;
  void validate() const;
};

SpeedRange default_speed_range(ScenarioTag tag);

/// Scenes in family order (Cruise, LeftTurn, CutIn, HighSpeed, Occlusion,
/// Curve); each scene draws from its own seed stream.
std::vector<Scene> generate(const GeneratorConfig & config);

struct SceneSplit
{
  std::vector<Scene> train;
  std::vector<Scene> val;
};

/// Stratified by tag. Membership is decided by a seeded shuffle; both halves
/// keep the input order.
SceneSplit split(const std::vector<Scene> & scenes, double train_fraction, std::uint64_t seed);

/// Index form of `split` used by the harness and the ablation runner.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
  const std::vector<ScenarioTag> & tags, double train_fraction, std::uint64_t seed);

}  // namespace gatekit

#endif  // GATEKIT__SCENARIO_GEN_HPP_
