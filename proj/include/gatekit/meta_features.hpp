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

#ifndef GATEKIT__META_FEATURES_HPP_
#define GATEKIT__META_FEATURES_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gatekit/core.hpp"
#include "gatekit/experts.hpp"

namespace gatekit
{

inline constexpr std::size_t kSlotsPerExpert = 8;
inline constexpr std::size_t kDiagnosticSlots = kSlotsPerExpert * kNumExperts;  // 24
inline constexpr std::size_t kGeometricSlots = 12;
inline constexpr std::size_t kFeatureDim = kDiagnosticSlots + kGeometricSlots;  // 36

/// Per-expert diagnostic slot, offset within the expert's block of 8.
enum class DiagSlot : std::size_t
{
  McVarianceMean = 0,
  McVarianceFinal,
  StabilityDevMean,
  StabilityDevMax,
  AccelViolationRate,
  CurvatureViolationRate,
  PathLength,
  FinalDisplacement,
};

/// Geometric slot, offset within the trailing block of 12.
enum class GeoSlot : std::size_t
{
  NeighborCount = 0,
  MinNeighborDist,
  MeanNeighborDist,
  EgoSpeedLast,
  EgoSpeedMean,
  EgoSpeedVar,
  EgoAccelMean,
  HeadingChangeTotal,
  HistoryCurvatureMean,
  HistoryDisplacement,
  IntersectionFlag,
  LaneCurvature,
};

constexpr std::size_t slot_index(int expert, DiagSlot s)
{
  return static_cast<std::size_t>(expert) * kSlotsPerExpert + static_cast<std::size_t>(s);
}
constexpr std::size_t slot_index(GeoSlot s)
{
  return kDiagnosticSlots + static_cast<std::size_t>(s);
}

/// Column names in slot order, e.g. "physics_mc_variance_mean", "neighbor_count".
const std::array<std::string, kFeatureDim> & feature_names();

/// Distance reported when a scene has no neighbors.
inline constexpr double kNoNeighborDistance = 100.0;

struct MetaFeatureVector
{
  std::array<double, kFeatureDim> values{};

  double & operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double diag(int expert, DiagSlot s) const { return values[slot_index(expert, s)]; }
  double geo(GeoSlot s) const { return values[slot_index(s)]; }
  bool all_finite() const;

  friend bool operator==(const MetaFeatureVector &, const MetaFeatureVector &) = default;
};

using FeatureMask = std::array<bool, kFeatureDim>;
FeatureMask all_features_mask();
FeatureMask geometric_only_mask();
/// Everything except the given expert's 8 diagnostic slots (28 slots).
FeatureMask without_expert_mask(int expert);

struct FeatureOptions
{
  int stochastic_passes{8};
  int perturbation_samples{3};
  double perturbation_noise{0.1};  // m
  double accel_limit{8.0};         // m/s^2
  double curvature_limit{0.5};     // 1/m
  Horizons horizons;
};

struct UncertaintyStats
{
  double variance_mean{0.0};
  double variance_final{0.0};
};

/// Positional variance across passes: per step, the mean squared distance to
/// the pass-mean position.
UncertaintyStats uncertainty(const std::vector<Trajectory> & passes);

struct StabilityStats
{
  double dev_mean{0.0};
  double dev_max{0.0};
};

/// Re-predicts under i.i.d. Gaussian noise on every history position (ego and
/// neighbors) and reports the ADE to the clean prediction.
StabilityStats stability(
  const Expert & expert, const Scene & scene, int samples, double noise_scale, std::uint64_t seed,
  const Horizons & horizons = {});

struct ViolationRates
{
  double accel_rate{0.0};
  double curvature_rate{0.0};
};

/// Fraction of interior steps whose second-difference acceleration or
/// three-point curvature exceeds the limit.
ViolationRates physics_violation(const Trajectory & traj, double accel_limit, double curvature_limit);

/// Circumcircle curvature of three points; 0 for (near-)collinear triples.
double menger_curvature(Vec2 a, Vec2 b, Vec2 c);

/// The 12 geometric descriptors, written into their slots of `out`.
void geometric_features(const Scene & scene, MetaFeatureVector & out);

struct SceneAnalysis
{
  MetaFeatureVector features;
  /// Clamped predictions; empty for experts that were not run.
  std::array<std::optional<Trajectory>, kNumExperts> predictions;
};

/// Runs the selected experts and fills their diagnostic blocks plus the
/// geometric block. Skipped experts leave their 8 slots at zero.
SceneAnalysis analyze_scene(
  const Scene & scene, const ExpertPool & pool, std::uint64_t seed, const FeatureOptions & options,
  const std::array<bool, kNumExperts> & run = {true, true, true});

MetaFeatureVector extract(
  const Scene & scene, const ExpertPool & pool, std::uint64_t seed,
  const FeatureOptions & options = {});

struct NormalizationStats
{
  std::array<double, kFeatureDim> mean{};
  std::array<double, kFeatureDim> std{};

  friend bool operator==(const NormalizationStats &, const NormalizationStats &) = default;
};

inline constexpr double kStdFloor = 1e-8;

/// Per-slot z-score statistics (population std, floored).
NormalizationStats fit_normalizer(const std::vector<MetaFeatureVector> & vectors);
MetaFeatureVector apply_normalizer(const NormalizationStats & stats, const MetaFeatureVector & v);

}  // namespace gatekit

#endif  // GATEKIT__META_FEATURES_HPP_
