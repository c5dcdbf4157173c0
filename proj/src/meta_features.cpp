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

#include "gatekit/meta_features.hpp"

#include <algorithm>
#include <cmath>

#include "gatekit/random.hpp"

namespace gatekit
{

const std::array<std::string, kFeatureDim> & feature_names()
{
  static const std::array<std::string, kFeatureDim> names = [] {
      const char * experts[] = {"physics", "interactive", "curvature"};
      const char * diag[] = {"mc_variance_mean", "mc_variance_final", "stability_dev_mean",
        "stability_dev_max", "accel_violation_rate", "curvature_violation_rate", "path_length",
        "final_displacement"};
      const char * geo[] = {"neighbor_count", "min_neighbor_dist", "mean_neighbor_dist",
        "ego_speed_last", "ego_speed_mean", "ego_speed_var", "ego_accel_mean",
        "heading_change_total", "history_curvature_mean", "history_displacement",
        "intersection_flag", "lane_curvature"};
      std::array<std::string, kFeatureDim> out;
      std::size_t i = 0;
      for (const char * e : experts) {
        for (const char * d : diag) {
          out[i++] = std::string(e) + "_" + d;
        }
      }
      for (const char * g : geo) {
        out[i++] = g;
      }
      return out;
    }();
  return names;
}

bool MetaFeatureVector::all_finite() const
{
  return std::all_of(values.begin(), values.end(), [](double v) {return std::isfinite(v);});
}

FeatureMask all_features_mask()
{
  FeatureMask m;
  m.fill(true);
  return m;
}

FeatureMask geometric_only_mask()
{
  FeatureMask m;
  m.fill(false);
  for (std::size_t i = kDiagnosticSlots; i < kFeatureDim; ++i) {
    m[i] = true;
  }
  return m;
}

FeatureMask without_expert_mask(int expert)
{
  auto m = all_features_mask();
  for (std::size_t s = 0; s < kSlotsPerExpert; ++s) {
    m[static_cast<std::size_t>(expert) * kSlotsPerExpert + s] = false;
  }
  return m;
}

UncertaintyStats uncertainty(const std::vector<Trajectory> & passes)
{
  if (passes.size() < 2) {
    throw ContractError("uncertainty needs at least 2 passes, got " + std::to_string(passes.size()));
  }
  const std::size_t len = passes.front().size();
  for (const auto & p : passes) {
    if (p.size() != len) {
      throw ContractError("uncertainty passes differ in length");
    }
  }
  const double n = static_cast<double>(passes.size());
  UncertaintyStats out;
  double sum = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    // Offsets from the first pass keep identical passes at exactly zero.
    const Vec2 ref = passes.front()[t].position();
    Vec2 mean;
    for (const auto & p : passes) {
      mean = mean + (p[t].position() - ref);
    }
    mean = (1.0 / n) * mean;
    double var = 0.0;
    for (const auto & p : passes) {
      const Vec2 d = (p[t].position() - ref) - mean;
      var += d.x * d.x + d.y * d.y;
    }
    var /= n;
    sum += var;
    if (t + 1 == len) {
      out.variance_final = var;
    }
  }
  out.variance_mean = sum / static_cast<double>(len);
  return out;
}

namespace
{

Trajectory jitter_positions(const Trajectory & traj, Rng & rng, double noise)
{
  std::vector<AgentState> states = traj.states();
  for (auto & s : states) {
    s.x += gaussian(rng, noise);
    s.y += gaussian(rng, noise);
  }
  return Trajectory(std::move(states), traj.rate_hz(), traj.start_time());
}

Trajectory clamp_to(const Trajectory & t, const Horizons & hz)
{
  return clamp_horizon(t, hz);
}

}  // namespace

StabilityStats stability(
  const Expert & expert, const Scene & scene, int samples, double noise_scale, std::uint64_t seed,
  const Horizons & horizons)
{
  if (samples < 1) {
    throw ContractError("stability needs at least one perturbation sample");
  }
  if (!(noise_scale >= 0.0)) {
    throw ContractError("stability noise scale must be non-negative");
  }
  const Trajectory clean = clamp_to(expert.predict(scene).trajectory, horizons);
  StabilityStats out;
  if (noise_scale == 0.0) {
    return out;
  }
  // Same perturbations for every expert, so their deviations are comparable.
  const std::uint64_t base = derive_seed(seed ^ hash_string(scene.id), 211);
  double sum = 0.0;
  for (int k = 0; k < samples; ++k) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(k)));
    Scene perturbed = scene;
    perturbed.ego_history = jitter_positions(scene.ego_history, rng, noise_scale);
    for (auto & nb : perturbed.neighbor_histories) {
      nb = jitter_positions(nb, rng, noise_scale);
    }
    const Trajectory moved = clamp_to(expert.predict(perturbed).trajectory, horizons);
    const double dev = ade(moved, clean);
    sum += dev;
    out.dev_max = std::max(out.dev_max, dev);
  }
  out.dev_mean = sum / samples;
  return out;
}

double menger_curvature(Vec2 a, Vec2 b, Vec2 c)
{
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double area = 0.5 * std::abs(cross);
  if (area < 1e-12) {
    return 0.0;
  }
  const double ab = norm(b - a);
  const double bc = norm(c - b);
  const double ca = norm(a - c);
  const double denom = ab * bc * ca;
  if (denom <= 0.0) {
    return 0.0;
  }
  return 4.0 * area / denom;
}

ViolationRates physics_violation(const Trajectory & traj, double accel_limit, double curvature_limit)
{
  if (traj.size() < 3) {
    throw ContractError("physics_violation needs at least 3 states, got " +
      std::to_string(traj.size()));
  }
  const double dt = traj.dt();
  std::size_t accel_hits = 0;
  std::size_t curv_hits = 0;
  const std::size_t interior = traj.size() - 2;
  for (std::size_t i = 1; i + 1 < traj.size(); ++i) {
    const Vec2 a = traj[i - 1].position();
    const Vec2 b = traj[i].position();
    const Vec2 c = traj[i + 1].position();
    const Vec2 second = (c - b) - (b - a);
    const double accel = norm(second) / (dt * dt);
    if (accel > accel_limit) {
      ++accel_hits;
    }
    if (menger_curvature(a, b, c) > curvature_limit) {
      ++curv_hits;
    }
  }
  return {static_cast<double>(accel_hits) / static_cast<double>(interior),
    static_cast<double>(curv_hits) / static_cast<double>(interior)};
}

void geometric_features(const Scene & scene, MetaFeatureVector & out)
{
  const auto & h = scene.ego_history;
  const auto & now = h.back();
  const auto set = [&](GeoSlot s, double v) {out[slot_index(s)] = v;};

  set(GeoSlot::NeighborCount, static_cast<double>(scene.neighbor_histories.size()));
  if (scene.neighbor_histories.empty()) {
    set(GeoSlot::MinNeighborDist, kNoNeighborDistance);
    set(GeoSlot::MeanNeighborDist, kNoNeighborDistance);
  } else {
    double dmin = kNoNeighborDistance;
    double dsum = 0.0;
    for (const auto & nb : scene.neighbor_histories) {
      const double d = norm(nb.back().position() - now.position());
      dmin = std::min(dmin, d);
      dsum += d;
    }
    set(GeoSlot::MinNeighborDist, dmin);
    set(GeoSlot::MeanNeighborDist, dsum / static_cast<double>(scene.neighbor_histories.size()));
  }

  const double n = static_cast<double>(h.size());
  double speed_sum = 0.0;
  for (const auto & s : h) {
    speed_sum += s.speed();
  }
  const double speed_mean = speed_sum / n;
  double speed_var = 0.0;
  for (const auto & s : h) {
    speed_var += (s.speed() - speed_mean) * (s.speed() - speed_mean);
  }
  speed_var /= n;
  set(GeoSlot::EgoSpeedLast, now.speed());
  set(GeoSlot::EgoSpeedMean, speed_mean);
  set(GeoSlot::EgoSpeedVar, speed_var);
  const double duration = h.size() > 1 ? static_cast<double>(h.size() - 1) * h.dt() : 1.0;
  set(GeoSlot::EgoAccelMean, h.size() > 1 ? (now.speed() - h.front().speed()) / duration : 0.0);

  double turn = 0.0;
  double path = 0.0;
  for (std::size_t k = 1; k < h.size(); ++k) {
    turn += normalize_angle(h[k].heading - h[k - 1].heading);
    path += norm(h[k].position() - h[k - 1].position());
  }
  set(GeoSlot::HeadingChangeTotal, turn);
  set(GeoSlot::HistoryCurvatureMean, path > 0.5 ? turn / path : 0.0);
  set(GeoSlot::HistoryDisplacement, norm(now.position() - h.front().position()));
  set(GeoSlot::IntersectionFlag, scene.map.intersection ? 1.0 : 0.0);
  set(GeoSlot::LaneCurvature, scene.map.lane_curvature);
}

SceneAnalysis analyze_scene(
  const Scene & scene, const ExpertPool & pool, std::uint64_t seed, const FeatureOptions & options,
  const std::array<bool, kNumExperts> & run)
{
  if (pool.size() != static_cast<std::size_t>(kNumExperts)) {
    throw ContractError("meta-feature extraction needs the full 3-expert pool");
  }
  SceneAnalysis out;
  const Vec2 origin = scene.ego_history.back().position();
  for (std::size_t slot = 0; slot < pool.size(); ++slot) {
    const Expert & expert = pool[slot];
    const int e = expert.id().index;
    if (!run[static_cast<std::size_t>(e)]) {
      continue;
    }
    const Trajectory pred = clamp_horizon(expert.predict(scene).trajectory, options.horizons);

    std::vector<Trajectory> passes;
    for (auto & p : predict_stochastic(expert, scene, options.stochastic_passes, seed)) {
      passes.push_back(clamp_horizon(p, options.horizons));
    }
    const auto unc = uncertainty(passes);
    const auto stab = stability(expert, scene, options.perturbation_samples,
        options.perturbation_noise, seed, options.horizons);
    const auto viol = physics_violation(pred, options.accel_limit, options.curvature_limit);

    double path = norm(pred.front().position() - origin);
    for (std::size_t k = 1; k < pred.size(); ++k) {
      path += norm(pred[k].position() - pred[k - 1].position());
    }

    auto & f = out.features;
    f[slot_index(e, DiagSlot::McVarianceMean)] = unc.variance_mean;
    f[slot_index(e, DiagSlot::McVarianceFinal)] = unc.variance_final;
    f[slot_index(e, DiagSlot::StabilityDevMean)] = stab.dev_mean;
    f[slot_index(e, DiagSlot::StabilityDevMax)] = stab.dev_max;
    f[slot_index(e, DiagSlot::AccelViolationRate)] = viol.accel_rate;
    f[slot_index(e, DiagSlot::CurvatureViolationRate)] = viol.curvature_rate;
    f[slot_index(e, DiagSlot::PathLength)] = path;
    f[slot_index(e, DiagSlot::FinalDisplacement)] = norm(pred.back().position() - origin);
    out.predictions[static_cast<std::size_t>(e)] = pred;
  }
  geometric_features(scene, out.features);
  return out;
}

MetaFeatureVector extract(
  const Scene & scene, const ExpertPool & pool, std::uint64_t seed, const FeatureOptions & options)
{
  return analyze_scene(scene, pool, seed, options).features;
}

NormalizationStats fit_normalizer(const std::vector<MetaFeatureVector> & vectors)
{
  if (vectors.size() < 2) {
    throw ContractError("normalizer needs at least 2 vectors, got " +
      std::to_string(vectors.size()));
  }
  NormalizationStats s;
  const double n = static_cast<double>(vectors.size());
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    double sum = 0.0;
    for (const auto & v : vectors) {
      sum += v[i];
    }
    const bool constant = std::all_of(vectors.begin(), vectors.end(),
        [&](const MetaFeatureVector & v) {return v[i] == vectors.front()[i];});
    const double mean = constant ? vectors.front()[i] : sum / n;
    double sq = 0.0;
    for (const auto & v : vectors) {
      sq += (v[i] - mean) * (v[i] - mean);
    }
    s.mean[i] = mean;
    s.std[i] = std::max(std::sqrt(sq / n), kStdFloor);
  }
  return s;
}

MetaFeatureVector apply_normalizer(const NormalizationStats & stats, const MetaFeatureVector & v)
{
  MetaFeatureVector out;
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    out[i] = (v[i] - stats.mean[i]) / stats.std[i];
  }
  return out;
}

}  // namespace gatekit
