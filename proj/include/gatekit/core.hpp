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

#ifndef GATEKIT__CORE_HPP_
#define GATEKIT__CORE_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gatekit
{

/// Raised when a caller breaks an operation's precondition.
class ContractError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed or inconsistent input data (files, records, datasets).
class DataError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

struct Vec2
{
  double x{0.0};
  double y{0.0};
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 v);

/// Planar agent state: position (m), velocity (m/s), heading (rad).
struct AgentState
{
  double x{0.0};
  double y{0.0};
  double vx{0.0};
  double vy{0.0};
  double heading{0.0};

  Vec2 position() const { return {x, y}; }
  Vec2 velocity() const { return {vx, vy}; }
  double speed() const;
};

bool operator==(const AgentState & a, const AgentState & b);

/// Fixed-rate state sequence. The first state sits at `start_time` seconds;
/// state k sits at start_time + k / rate_hz.
class Trajectory
{
public:
  Trajectory() = default;
  Trajectory(std::vector<AgentState> states, double rate_hz, double start_time = 0.0);

  std::size_t size() const { return states_.size(); }
  bool empty() const { return states_.empty(); }
  double rate_hz() const { return rate_hz_; }
  double dt() const { return 1.0 / rate_hz_; }
  double start_time() const { return start_time_; }
  double time_at(std::size_t k) const { return start_time_ + static_cast<double>(k) * dt(); }
  double end_time() const { return time_at(states_.size() - 1); }

  const AgentState & operator[](std::size_t k) const { return states_[k]; }
  const AgentState & front() const { return states_.front(); }
  const AgentState & back() const { return states_.back(); }
  const std::vector<AgentState> & states() const { return states_; }
  auto begin() const { return states_.begin(); }
  auto end() const { return states_.end(); }

  /// First `n` states, same rate and start time.
  Trajectory prefix(std::size_t n) const;

  friend bool operator==(const Trajectory & a, const Trajectory & b);

private:
  std::vector<AgentState> states_;
  double rate_hz_{20.0};
  double start_time_{0.0};
};

enum class ScenarioTag { Cruise, LeftTurn, CutIn, HighSpeed, Occlusion, Curve };

inline constexpr std::array<ScenarioTag, 6> kAllScenarioTags{
  ScenarioTag::Cruise, ScenarioTag::LeftTurn, ScenarioTag::CutIn,
  ScenarioTag::HighSpeed, ScenarioTag::Occlusion, ScenarioTag::Curve};

std::string_view to_string(ScenarioTag tag);
/// Accepts the canonical names ("Cruise", "LeftTurn", ...) and snake_case
/// aliases ("left_turn", "cut_in", ...).
std::optional<ScenarioTag> parse_scenario_tag(std::string_view text);

struct MapContext
{
  double lane_curvature{0.0};  // 1/m
  bool intersection{false};
};

struct Horizons
{
  double t_history_s{2.0};
  double t_future_s{4.0};
  double rate_hz{20.0};

  std::size_t history_steps() const;
  std::size_t future_steps() const;
  /// Throws ContractError when any field is non-positive or the future
  /// horizon is not an integral number of steps.
  void validate() const;
};

struct Scene
{
  std::string id;
  ScenarioTag tag{ScenarioTag::Cruise};
  Trajectory ego_history;
  std::vector<Trajectory> neighbor_histories;
  Trajectory ground_truth_future;
  MapContext map;
};

/// Checks the scene invariants against `horizons`; throws DataError naming the
/// first violated rule.
void validate_scene(const Scene & scene, const Horizons & horizons = {});

// ---------------------------------------------------------------------------
// Metrics

/// Mean positional L2 error over the horizon.
double ade(const Trajectory & pred, const Trajectory & truth);
/// Positional L2 error at the last index.
double fde(const Trajectory & pred, const Trajectory & truth);
Trajectory clamp_horizon(const Trajectory & pred, const Horizons & horizons);

struct OrrValue
{
  double percent{0.0};
  /// Set when the gate beats the oracle, which a per-sample argmin oracle
  /// cannot allow; it points at a broken oracle computation.
  bool beats_oracle{false};
};

/// Oracle realization rate: share of the baseline-to-oracle gap closed by the
/// gate, in percent. Throws ContractError when fde_baseline <= fde_oracle.
OrrValue orr(double fde_baseline, double fde_gate, double fde_oracle);

/// 100 * (baseline - value) / baseline.
double percent_reduction(double baseline, double value);

}  // namespace gatekit

#endif  // GATEKIT__CORE_HPP_
