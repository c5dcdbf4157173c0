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

#ifndef GATEKIT__EXPERTS_HPP_
#define GATEKIT__EXPERTS_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gatekit/core.hpp"
#include "gatekit/random.hpp"

namespace gatekit
{

struct ExpertId
{
  int index{0};
  std::string name;
  double cost_weight{1.0};
};

/// Pool slot indices. The interactive expert is the expensive one.
inline constexpr int kPhysicsExpert = 0;
inline constexpr int kInteractiveExpert = 1;
inline constexpr int kCurvatureExpert = 2;
inline constexpr int kNumExperts = 3;

struct ExpertConfig
{
  /// Output length; longer than the scoring horizon so clamping is exercised.
  std::size_t rollout_steps{100};
  /// Multiplies every stochastic-pass perturbation; 0 makes passes identical.
  double jitter_scale{1.0};
  /// When set, that expert's passes carry no jitter (a dead-dropout blind spot).
  std::optional<int> zero_jitter_expert;

  // Kalman filter
  double process_noise{0.0005};     // white-acceleration spectral density, m^2/s^3
  double meas_position_std{0.05};   // m
  double meas_velocity_std{0.1};    // m/s

  // Unicycle fit
  std::size_t fit_window{10};
  double yaw_significance{2.0};     // |yaw rate| below this many standard errors -> 0
  double min_moving_speed{0.1};     // m/s; below it the history is degenerate

  // Interaction response
  double react_distance{5.0};       // m
  double max_evasion{1.0};          // m
  double evasion_ramp_s{2.0};
  double ignore_beyond{50.0};       // m; neighbors farther than this never interact

  // Stochastic pass jitter (relative, before jitter_scale)
  double yaw_speed_jitter{0.05};
  double react_distance_jitter{0.2};
  double process_noise_log_std{0.5};
};

struct Prediction
{
  Trajectory trajectory;
  /// Zero-motion hold because the fit window never moved.
  bool degenerate_fallback{false};
  /// Number of neighbors the interactive expert reacted to.
  int reactions{0};
};

class Expert
{
public:
  Expert(ExpertId id, ExpertConfig config);
  virtual ~Expert() = default;

  const ExpertId & id() const { return id_; }
  const ExpertConfig & config() const { return config_; }

  virtual Prediction predict(const Scene & scene) const = 0;
  /// One stochastic pass; perturbations scale with `jitter`.
  virtual Prediction predict_perturbed(const Scene & scene, Rng & rng, double jitter) const = 0;

protected:
  ExpertId id_;
  ExpertConfig config_;
};

/// Constant-velocity Kalman filter over the ego history, extrapolated with
/// zero acceleration.
class PhysicsExpert : public Expert
{
public:
  explicit PhysicsExpert(ExpertConfig config = {});
  Prediction predict(const Scene & scene) const override;
  Prediction predict_perturbed(const Scene & scene, Rng & rng, double jitter) const override;

  struct Filtered
  {
    AgentState state;
    std::array<double, 16> covariance{};  // row-major 4x4
  };
  /// Terminal filtered state for the ego history.
  Filtered filter(const Trajectory & history, double process_noise) const;
};

/// Constant-turn-rate, constant-speed rollout fitted to the trailing window.
class CurvatureExpert : public Expert
{
public:
  explicit CurvatureExpert(ExpertConfig config = {});
  Prediction predict(const Scene & scene) const override;
  Prediction predict_perturbed(const Scene & scene, Rng & rng, double jitter) const override;

  struct Fit
  {
    Vec2 anchor;
    double heading{0.0};
    double speed{0.0};
    double yaw_rate{0.0};
    bool degenerate{false};
  };
  Fit fit(const Trajectory & history) const;
  Trajectory rollout(const Fit & fit, double rate_hz) const;
};

/// Curvature rollout plus a lateral evasion for neighbors whose extrapolated
/// paths come within the reaction radius.
class InteractiveExpert : public Expert
{
public:
  explicit InteractiveExpert(ExpertConfig config = {});
  Prediction predict(const Scene & scene) const override;
  Prediction predict_perturbed(const Scene & scene, Rng & rng, double jitter) const override;

private:
  Prediction respond(
    const Scene & scene, const CurvatureExpert::Fit & fit, double react_distance) const;
  CurvatureExpert base_;
};

/// Ordered expert set; slot i holds the expert whose id().index == i.
class ExpertPool
{
public:
  ExpertPool() = default;
  explicit ExpertPool(std::vector<std::shared_ptr<const Expert>> experts);

  /// physics (cost 1), interactive (cost 10), curvature (cost 3).
  static ExpertPool standard(const ExpertConfig & config = {});

  std::size_t size() const { return experts_.size(); }
  const Expert & operator[](std::size_t i) const { return *experts_[i]; }
  const Expert & at(std::size_t i) const;
  std::vector<ExpertId> ids() const;

private:
  std::vector<std::shared_ptr<const Expert>> experts_;
};

Trajectory predict_physics(const Scene & scene, const ExpertConfig & config = {});
Trajectory predict_curvature(const Scene & scene, const ExpertConfig & config = {});
Trajectory predict_interactive(const Scene & scene, const ExpertConfig & config = {});

/// `passes` perturbed predictions, deterministic in (seed, scene id). Pass p
/// uses the same random stream for every expert. Throws ContractError when
/// passes < 2.
std::vector<Trajectory> predict_stochastic(
  const Expert & expert, const Scene & scene, int passes, std::uint64_t seed);

}  // namespace gatekit

#endif  // GATEKIT__EXPERTS_HPP_
