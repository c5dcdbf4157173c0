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

#include "gatekit/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace gatekit
{

double normalize_angle(double radians)
{
  double a = std::fmod(radians, 2.0 * kPi);
  if (a <= -kPi) {
    a += 2.0 * kPi;
  } else if (a > kPi) {
    a -= 2.0 * kPi;
  }
  return a;
}

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

double AgentState::speed() const { return std::hypot(vx, vy); }

bool operator==(const AgentState & a, const AgentState & b)
{
  return a.x == b.x && a.y == b.y && a.vx == b.vx && a.vy == b.vy && a.heading == b.heading;
}

Trajectory::Trajectory(std::vector<AgentState> states, double rate_hz, double start_time)
: states_(std::move(states)), rate_hz_(rate_hz), start_time_(start_time)
{
  if (states_.empty()) {
    throw ContractError("trajectory must contain at least one state");
  }
  if (!(rate_hz_ > 0.0) || !std::isfinite(rate_hz_)) {
    throw ContractError("trajectory rate must be positive, got " + std::to_string(rate_hz_));
  }
  if (!std::isfinite(start_time_)) {
    throw ContractError("trajectory start time must be finite");
  }
  for (std::size_t k = 0; k < states_.size(); ++k) {
    auto & s = states_[k];
    if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.vx) ||
      !std::isfinite(s.vy) || !std::isfinite(s.heading))
    {
      throw ContractError("trajectory state " + std::to_string(k) + " has a non-finite field");
    }
    s.heading = normalize_angle(s.heading);
  }
}

Trajectory Trajectory::prefix(std::size_t n) const
{
  if (n == 0 || n > states_.size()) {
    throw ContractError(
      "prefix length " + std::to_string(n) + " outside [1, " + std::to_string(states_.size()) +
      "]");
  }
  return Trajectory(
    std::vector<AgentState>(states_.begin(), states_.begin() + static_cast<std::ptrdiff_t>(n)),
    rate_hz_, start_time_);
}

bool operator==(const Trajectory & a, const Trajectory & b)
{
  return a.rate_hz_ == b.rate_hz_ && a.start_time_ == b.start_time_ && a.states_ == b.states_;
}

std::string_view to_string(ScenarioTag tag)
{
  switch (tag) {
    case ScenarioTag::Cruise:
      return "Cruise";
    case ScenarioTag::LeftTurn:
      return "LeftTurn";
    case ScenarioTag::CutIn:
      return "CutIn";
    case ScenarioTag::HighSpeed:
      return "HighSpeed";
    case ScenarioTag::Occlusion:
      return "Occlusion";
    case ScenarioTag::Curve:
      return "Curve";
  }
  return "Unknown";
}

std::optional<ScenarioTag> parse_scenario_tag(std::string_view text)
{
  std::string folded;
  for (char c : text) {
    if (c != '_' && c != '-') {
      folded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  for (auto tag : kAllScenarioTags) {
    std::string name;
    for (char c : to_string(tag)) {
      name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (name == folded) {
      return tag;
    }
  }
  return std::nullopt;
}

std::size_t Horizons::history_steps() const
{
  return static_cast<std::size_t>(std::llround(t_history_s * rate_hz));
}

std::size_t Horizons::future_steps() const
{
  return static_cast<std::size_t>(std::llround(t_future_s * rate_hz));
}

void Horizons::validate() const
{
  if (!(t_history_s > 0.0) || !(t_future_s > 0.0) || !(rate_hz > 0.0)) {
    throw ContractError("horizons must be positive");
  }
  const double steps = t_future_s * rate_hz;
  if (std::abs(steps - std::round(steps)) > 1e-9) {
    throw ContractError("t_future_s * rate_hz must be an integer, got " + std::to_string(steps));
  }
}

void validate_scene(const Scene & scene, const Horizons & horizons)
{
  const auto fail = [&](const std::string & why) {
    throw DataError("scene '" + scene.id + "': " + why);
  };
  if (scene.ego_history.empty() || scene.ground_truth_future.empty()) {
    fail("empty ego history or future");
  }
  if (scene.ego_history.size() != horizons.history_steps()) {
    fail(
      "ego history has " + std::to_string(scene.ego_history.size()) + " states, expected " +
      std::to_string(horizons.history_steps()));
  }
  if (scene.ground_truth_future.size() != horizons.future_steps()) {
    fail(
      "future has " + std::to_string(scene.ground_truth_future.size()) + " states, expected " +
      std::to_string(horizons.future_steps()));
  }
  if (scene.ego_history.rate_hz() != horizons.rate_hz ||
    scene.ground_truth_future.rate_hz() != horizons.rate_hz)
  {
    fail("rate does not match the configured horizons");
  }
  const double gap = scene.ground_truth_future.start_time() - scene.ego_history.end_time();
  if (std::abs(gap - scene.ego_history.dt()) > 1e-9) {
    fail("future must begin one time step after the last history state");
  }
  for (std::size_t i = 0; i < scene.neighbor_histories.size(); ++i) {
    const auto & n = scene.neighbor_histories[i];
    if (n.size() != scene.ego_history.size() || n.rate_hz() != scene.ego_history.rate_hz()) {
      fail("neighbor " + std::to_string(i) + " history is not aligned with the ego history");
    }
  }
  if (!std::isfinite(scene.map.lane_curvature)) {
    fail("lane curvature is not finite");
  }
}

namespace
{

void require_same_length(const Trajectory & pred, const Trajectory & truth, const char * what)
{
  if (pred.empty() || truth.empty()) {
    throw ContractError(std::string(what) + ": empty trajectory");
  }
  if (pred.size() != truth.size()) {
    throw ContractError(
      std::string(what) + ": length mismatch, pred has " + std::to_string(pred.size()) +
      " states, truth has " + std::to_string(truth.size()));
  }
}

}  // namespace

double ade(const Trajectory & pred, const Trajectory & truth)
{
  require_same_length(pred, truth, "ade");
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    sum += norm(pred[t].position() - truth[t].position());
  }
  return sum / static_cast<double>(pred.size());
}

double fde(const Trajectory & pred, const Trajectory & truth)
{
  require_same_length(pred, truth, "fde");
  return norm(pred.back().position() - truth.back().position());
}

Trajectory clamp_horizon(const Trajectory & pred, const Horizons & horizons)
{
  const std::size_t need = horizons.future_steps();
  if (pred.size() < need) {
    throw ContractError(
      "prediction shorter than horizon: required " + std::to_string(need) + " states, got " +
      std::to_string(pred.size()));
  }
  if (pred.size() == need) {
    return pred;
  }
  return pred.prefix(need);
}

OrrValue orr(double fde_baseline, double fde_gate, double fde_oracle)
{
  if (!(fde_baseline > fde_oracle)) {
    throw ContractError(
      "degenerate oracle gap: baseline FDE " + std::to_string(fde_baseline) +
      " must exceed oracle FDE " + std::to_string(fde_oracle));
  }
  OrrValue out;
  out.percent = 100.0 * (fde_baseline - fde_gate) / (fde_baseline - fde_oracle);
  out.beats_oracle = fde_gate < fde_oracle;
  return out;
}

double percent_reduction(double baseline, double value)
{
  if (!(baseline > 0.0)) {
    throw ContractError("percent reduction needs a positive baseline");
  }
  return 100.0 * (baseline - value) / baseline;
}

}  // namespace gatekit
