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

#include "gatekit/scenario_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>

#include "gatekit/random.hpp"

namespace gatekit
{

SpeedRange default_speed_range(ScenarioTag tag)
{
  switch (tag) {
    case ScenarioTag::Cruise:
      return {8.0, 15.0};
    case ScenarioTag::LeftTurn:
      return {3.5, 6.0};
    case ScenarioTag::CutIn:
      return {8.0, 14.0};
    case ScenarioTag::HighSpeed:
      return {25.0, 35.0};
    case ScenarioTag::Occlusion:
      return {8.0, 14.0};
    case ScenarioTag::Curve:
      return {6.0, 12.0};
  }
  return {8.0, 15.0};
}

GeneratorConfig GeneratorConfig::defaults()
{
  GeneratorConfig c;
  for (auto tag : kAllScenarioTags) {
    c.counts[tag] = 100;
    c.speed_ranges[tag] = default_speed_range(tag);
  }
  return c;
}

GeneratorConfig GeneratorConfig::single_family(ScenarioTag tag, int count, std::uint64_t seed)
{
  auto c = defaults();
  for (auto t : kAllScenarioTags) {
    c.counts[t] = 0;
  }
  c.counts[tag] = count;
  c.seed = seed;
  return c;
}

int GeneratorConfig::total_count() const
{
  int total = 0;
  for (const auto & [tag, n] : counts) {
    total += n;
  }
  return total;
}

SpeedRange GeneratorConfig::speed_range(ScenarioTag tag) const
{
  const auto it = speed_ranges.find(tag);
  return it == speed_ranges.end() ? default_speed_range(tag) : it->second;
}

void GeneratorConfig::validate() const
{
  horizons.validate();
  if (!(noise_position_std >= 0.0) || !(noise_velocity_std >= 0.0)) {
    throw ContractError("noise standard deviations must be non-negative");
  }
  for (const auto & [tag, n] : counts) {
    if (n < 0) {
      throw ContractError("negative scene count for " + std::string(to_string(tag)));
    }
  }
  for (const auto & [tag, r] : speed_ranges) {
    if (!(r.lo > 0.0) || !(r.hi >= r.lo)) {
      throw ContractError("invalid speed range for " + std::string(to_string(tag)));
    }
  }
  if (total_count() < 1) {
    throw ContractError("generator needs at least one scene (all counts are zero)");
  }
}

namespace
{

using Motion = std::function<AgentState(double)>;

double smoothstep(double u)
{
  if (u <= 0.0) {
    return 0.0;
  }
  if (u >= 1.0) {
    return 1.0;
  }
  return u * u * (3.0 - 2.0 * u);
}

double smoothstep_rate(double u)
{
  if (u <= 0.0 || u >= 1.0) {
    return 0.0;
  }
  return 6.0 * u * (1.0 - u);
}

AgentState make_state(Vec2 p, Vec2 v, double fallback_heading)
{
  const double speed = norm(v);
  const double heading = speed > 1e-9 ? std::atan2(v.y, v.x) : fallback_heading;
  return {p.x, p.y, v.x, v.y, heading};
}

/// Frame anchored at the ego position and heading at t = 0.
struct Frame
{
  Vec2 origin;
  double heading{0.0};

  Vec2 along() const { return {std::cos(heading), std::sin(heading)}; }
  Vec2 left() const { return {-std::sin(heading), std::cos(heading)}; }
  Vec2 to_world(double s, double l) const { return origin + s * along() + l * left(); }
  Vec2 dir_world(double s, double l) const { return s * along() + l * left(); }
};

Motion constant_velocity(Vec2 p0, Vec2 v)
{
  const double h = std::atan2(v.y, v.x);
  return [p0, v, h](double t) { return make_state(p0 + t * v, v, h); };
}

Motion constant_arc(Vec2 p0, double heading0, double speed, double curvature)
{
  const double omega = speed * curvature;
  return [=](double t) {
      const double th = heading0 + omega * t;
      Vec2 p;
      if (std::abs(omega) < 1e-12) {
        p = p0 + (speed * t) * Vec2{std::cos(heading0), std::sin(heading0)};
      } else {
        const double r = speed / omega;
        p = p0 + Vec2{r * (std::sin(th) - std::sin(heading0)),
          r * (-std::cos(th) + std::cos(heading0))};
      }
      const Vec2 v{speed * std::cos(th), speed * std::sin(th)};
      return AgentState{p.x, p.y, v.x, v.y, normalize_angle(th)};
    };
}

/// Left turn: heading follows a smoothstep sweep of +pi/2 that starts shortly
/// before the present; speed decelerates, holds, and re-accelerates.
Motion left_turn(const Frame & f, double v0, double t_start, double sweep_duration, double t_lo,
  double t_hi, double dt)
{
  const auto heading_at = [=](double t) {
      return f.heading + 0.5 * kPi * smoothstep((t - t_start) / sweep_duration);
    };
  const auto speed_at = [=](double t) {
      const double v_turn = 0.6 * v0;
      const double v_exit = 0.8 * v0;
      if (t <= 0.0) {
        return v0;
      }
      if (t <= 1.5) {
        return v0 + (v_turn - v0) * (t / 1.5);
      }
      if (t <= 3.0) {
        return v_turn;
      }
      if (t <= 4.0) {
        return v_turn + (v_exit - v_turn) * (t - 3.0);
      }
      return v_exit;
    };
  // Positions by midpoint integration on a fine grid that contains every tick.
  constexpr int kSub = 64;
  const double h = dt / kSub;
  const int n_back = static_cast<int>(std::ceil(-t_lo / dt)) * kSub;
  const int n_fwd = static_cast<int>(std::ceil(t_hi / dt)) * kSub;
  std::vector<Vec2> table(static_cast<std::size_t>(n_back + n_fwd + 1));
  table[static_cast<std::size_t>(n_back)] = f.origin;
  const auto rate = [&](double t) {
      const double th = heading_at(t);
      return speed_at(t) * Vec2{std::cos(th), std::sin(th)};
    };
  for (int i = 0; i < n_fwd; ++i) {
    const double t = i * h;
    const auto & prev = table[static_cast<std::size_t>(n_back + i)];
    table[static_cast<std::size_t>(n_back + i + 1)] = prev + h * rate(t + 0.5 * h);
  }
  for (int i = 0; i < n_back; ++i) {
    const double t = -i * h;
    const auto & prev = table[static_cast<std::size_t>(n_back - i)];
    table[static_cast<std::size_t>(n_back - i - 1)] = prev - h * rate(t - 0.5 * h);
  }
  return [=, table = std::move(table)](double t) {
      const long idx = std::lround(t / h) + n_back;
      const auto k = static_cast<std::size_t>(std::clamp<long>(idx, 0, static_cast<long>(table.size()) - 1));
      const double th = heading_at(t);
      const double v = speed_at(t);
      return AgentState{table[k].x, table[k].y, v * std::cos(th), v * std::sin(th),
        normalize_angle(th)};
    };
}

/// Straight motion plus a smooth lateral shift of `amplitude` (signed, along
/// the left normal) ramping over `ramp_s` seconds after t = 0.
Motion lateral_response(const Frame & f, double speed, double amplitude, double ramp_s)
{
  return [=](double t) {
      const double u = t / ramp_s;
      const double l = amplitude * smoothstep(u);
      const double l_rate = amplitude * smoothstep_rate(u) / ramp_s;
      const Vec2 p = f.to_world(speed * t, l);
      const Vec2 v = f.dir_world(speed, l_rate);
      return make_state(p, v, f.heading);
    };
}

struct Observation
{
  double pos_std{0.0};
  double vel_std{0.0};
};

AgentState observe(const AgentState & truth, const Observation & obs, Rng & rng)
{
  AgentState s = truth;
  s.x += truncated_gaussian(rng, obs.pos_std);
  s.y += truncated_gaussian(rng, obs.pos_std);
  s.vx += truncated_gaussian(rng, obs.vel_std);
  s.vy += truncated_gaussian(rng, obs.vel_std);
  if (std::hypot(s.vx, s.vy) > 0.5) {
    s.heading = std::atan2(s.vy, s.vx);
  }
  return s;
}

Trajectory sample_history(const Motion & m, const Horizons & hz, const Observation & obs, Rng & rng)
{
  const std::size_t n = hz.history_steps();
  const double dt = 1.0 / hz.rate_hz;
  const double t0 = -static_cast<double>(n - 1) * dt;
  std::vector<AgentState> states;
  states.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    states.push_back(observe(m(t0 + static_cast<double>(k) * dt), obs, rng));
  }
  return Trajectory(std::move(states), hz.rate_hz, t0);
}

Trajectory sample_future(const Motion & m, const Horizons & hz)
{
  const std::size_t n = hz.future_steps();
  const double dt = 1.0 / hz.rate_hz;
  std::vector<AgentState> states;
  states.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    states.push_back(m(static_cast<double>(k) * dt));
  }
  return Trajectory(std::move(states), hz.rate_hz, dt);
}

/// Adjacent-lane traffic that the ego future ignores. Every neighbor starts at
/// least 12 m away; "passing" ones are slower and drift alongside the ego.
std::vector<Motion> distractors(const Frame & f, double ego_speed, ScenarioTag tag, Rng & rng)
{
  std::vector<Motion> out;
  double p_passing = 0.45;
  double p_adjacent = 0.0;
  int min_count = 1;
  int max_count = 2;
  switch (tag) {
    case ScenarioTag::HighSpeed:
      p_passing = 0.8;
      p_adjacent = 0.6;
      break;
    case ScenarioTag::Cruise:
      p_adjacent = 0.9;
      min_count = 2;
      break;
    case ScenarioTag::Curve:
      p_passing = 0.2;
      min_count = 0;
      max_count = 1;
      break;
    case ScenarioTag::LeftTurn:
      p_passing = 0.0;
      break;
    default:
      break;
  }
  std::uniform_int_distribution<int> count_dist(min_count, max_count);
  const int count = count_dist(rng);
  for (int i = 0; i < count; ++i) {
    const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    if (tag == ScenarioTag::LeftTurn) {
      // Cross traffic through the intersection ahead.
      const double s0 = uniform(rng, 8.0, 20.0);
      const double l0 = side * uniform(rng, 6.0, 16.0);
      const double v = uniform(rng, 5.0, 10.0);
      out.push_back(constant_velocity(f.to_world(s0, l0), f.dir_world(0.0, -side * v)));
      continue;
    }
    if (i == 0 && uniform(rng, 0.0, 1.0) < p_adjacent) {
      // Same placement as a CutIn merger, but it holds its lane.
      const double ahead = uniform(rng, 10.0, 16.0);
      const double v = std::max(1.0, ego_speed - uniform(rng, 2.0, 4.0));
      out.push_back(constant_velocity(f.to_world(ahead, side * uniform(rng, 3.2, 3.8)), f.dir_world(v, 0.0)));
      continue;
    }
    if (uniform(rng, 0.0, 1.0) < p_passing) {
      const double lateral = side * uniform(rng, 5.3, 7.0);
      const double ahead = uniform(rng, 8.0, 16.0);
      const double slower = uniform(rng, 3.0, 9.0);
      const double v = std::max(1.0, ego_speed - slower);
      out.push_back(constant_velocity(f.to_world(ahead, lateral), f.dir_world(v, 0.0)));
    } else {
      const double lateral = side * uniform(rng, 4.5, 7.0);
      const double ahead = (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(rng, 12.0, 30.0);
      const double v = std::max(1.0, ego_speed + uniform(rng, -0.5, 0.5));
      out.push_back(constant_velocity(f.to_world(ahead, lateral), f.dir_world(v, 0.0)));
    }
  }
  return out;
}

/// Closest approach between two constant-velocity extrapolations over [0, horizon].
double closest_approach(Vec2 dp, Vec2 dv, double horizon)
{
  const double vv = dv.x * dv.x + dv.y * dv.y;
  double t = vv > 0.0 ? -(dp.x * dv.x + dp.y * dv.y) / vv : 0.0;
  t = std::clamp(t, 0.0, horizon);
  return norm(dp + t * dv);
}

std::string lower_name(ScenarioTag tag)
{
  std::string s;
  for (char c : to_string(tag)) {
    if (std::isupper(static_cast<unsigned char>(c)) && !s.empty()) {
      s.push_back('_');
    }
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return s;
}

Scene make_scene(const GeneratorConfig & cfg, ScenarioTag tag, int index)
{
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  const auto & hz = cfg.horizons;
  const double dt = 1.0 / hz.rate_hz;
  const Observation obs{cfg.noise_position_std, cfg.noise_velocity_std};
  const SpeedRange range = cfg.speed_range(tag);

  Frame f;
  f.origin = {uniform(rng, -50.0, 50.0), uniform(rng, -50.0, 50.0)};
  f.heading = uniform(rng, -kPi, kPi);

  Scene scene;
  char id[64];
  std::snprintf(id, sizeof(id), "%s-%04d", lower_name(tag).c_str(), index);
  scene.id = id;
  scene.tag = tag;

  Motion ego;
  std::vector<Motion> neighbors;
  double speed = uniform(rng, range.lo, range.hi);

  const auto arc_params = [&](double v) {
      const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      double kappa = uniform(rng, 0.02, 0.06);
      kappa = std::min(kappa, 4.5 / (v * v));  // lateral acceleration <= 4.5 m/s^2
      return sign * kappa;
    };

  bool occluded = false;
  switch (tag) {
    case ScenarioTag::Cruise:
    case ScenarioTag::HighSpeed: {
      ego = constant_velocity(f.origin, f.dir_world(speed, 0.0));
      if (tag == ScenarioTag::Cruise) {
        scene.map.intersection = uniform(rng, 0.0, 1.0) < 0.25;
      }
      neighbors = distractors(f, speed, tag, rng);
      break;
    }
    case ScenarioTag::Curve: {
      const double kappa = arc_params(speed);
      ego = constant_arc(f.origin, f.heading, speed, kappa);
      scene.map.lane_curvature = kappa;
      neighbors = distractors(f, speed, tag, rng);
      break;
    }
    case ScenarioTag::Occlusion: {
      occluded = true;
      if (uniform(rng, 0.0, 1.0) < 0.5) {
        ego = constant_velocity(f.origin, f.dir_world(speed, 0.0));
      } else {
        const double kappa = arc_params(speed);
        ego = constant_arc(f.origin, f.heading, speed, kappa);
        scene.map.lane_curvature = kappa;
      }
      neighbors = distractors(f, speed, ScenarioTag::Occlusion, rng);
      break;
    }
    case ScenarioTag::LeftTurn: {
      const double t_start = uniform(rng, -1.2, -0.6);
      const double t_lo = -hz.t_history_s - 1.0;
      const double t_hi = hz.t_future_s + 1.0;
      ego = left_turn(f, speed, t_start, 4.0, t_lo, t_hi, dt);
      scene.map.intersection = true;
      neighbors = distractors(f, speed, tag, rng);
      break;
    }
    case ScenarioTag::CutIn: {
      // Rejection-sample a merge whose straight-line closest approach is
      // clearly inside the reaction radius.
      for (int attempt = 0;; ++attempt) {
        const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
        const double ahead = uniform(rng, 10.0, 16.0);
        const double closing = uniform(rng, 2.0, 4.0);
        const double v_lat = uniform(rng, 1.0, 1.6);
        const double dmin = closest_approach(
          {ahead, side * 3.5}, {-closing, -side * v_lat}, hz.t_future_s);
        if (dmin < 1.0 || attempt > 100) {
          const double amplitude = -side * uniform(rng, 0.7, 1.0);
          ego = lateral_response(f, speed, amplitude, 2.0);
          neighbors.push_back(constant_velocity(
              f.to_world(ahead, side * 3.5), f.dir_world(speed - closing, -side * v_lat)));
          break;
        }
      }
      auto extra = distractors(f, speed, ScenarioTag::CutIn, rng);
      if (!extra.empty()) {
        neighbors.push_back(std::move(extra.front()));
      }
      break;
    }
  }

  scene.ego_history = sample_history(ego, hz, obs, rng);
  scene.ground_truth_future = sample_future(ego, hz);
  for (const auto & m : neighbors) {
    scene.neighbor_histories.push_back(sample_history(m, hz, obs, rng));
  }

  if (occluded) {
    auto states = scene.ego_history.states();
    const std::size_t hidden = states.size() / 2;
    const AgentState first_valid = states[hidden];
    for (std::size_t k = 0; k < hidden; ++k) {
      states[k] = AgentState{first_valid.x, first_valid.y, 0.0, 0.0, first_valid.heading};
    }
    scene.ego_history = Trajectory(
      std::move(states), scene.ego_history.rate_hz(), scene.ego_history.start_time());
  }
  return scene;
}

}  // namespace

std::vector<Scene> generate(const GeneratorConfig & config)
{
  config.validate();
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(config.total_count()));
  int index = 0;
  for (auto tag : kAllScenarioTags) {
    const auto it = config.counts.find(tag);
    const int n = it == config.counts.end() ? 0 : it->second;
    for (int i = 0; i < n; ++i) {
      scenes.push_back(make_scene(config, tag, index++));
    }
  }
  return scenes;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
  const std::vector<ScenarioTag> & tags, double train_fraction, std::uint64_t seed)
{
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ContractError("train_fraction must lie in (0, 1)");
  }
  const std::size_t n = tags.size();
  if (n < 2) {
    throw ContractError("split needs at least 2 scenes, got " + std::to_string(n));
  }
  auto total_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  total_train = std::clamp<std::size_t>(total_train, 1, n - 1);

  // Largest-remainder apportionment keeps each tag within one scene of its
  // proportional share while hitting the total exactly.
  std::vector<std::vector<std::size_t>> by_tag(kAllScenarioTags.size());
  for (std::size_t i = 0; i < n; ++i) {
    by_tag[static_cast<std::size_t>(tags[i])].push_back(i);
  }
  std::vector<std::size_t> quota(by_tag.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t t = 0; t < by_tag.size(); ++t) {
    const double exact = static_cast<double>(by_tag[t].size()) * static_cast<double>(total_train) /
      static_cast<double>(n);
    quota[t] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[t];
    remainders.emplace_back(exact - std::floor(exact), t);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto & a, const auto & b) {
      return a.first > b.first;
    });
  for (std::size_t r = 0; assigned < total_train && r < remainders.size(); ++r) {
    const std::size_t t = remainders[r].second;
    if (quota[t] < by_tag[t].size()) {
      ++quota[t];
      ++assigned;
    }
  }

  Rng rng(derive_seed(seed, 0x5917));
  std::vector<bool> in_train(n, false);
  for (std::size_t t = 0; t < by_tag.size(); ++t) {
    auto members = by_tag[t];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < quota[t]; ++k) {
      in_train[members[k]] = true;
    }
  }
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? train : val).push_back(i);
  }
  return {std::move(train), std::move(val)};
}

SceneSplit split(const std::vector<Scene> & scenes, double train_fraction, std::uint64_t seed)
{
  std::vector<ScenarioTag> tags;
  tags.reserve(scenes.size());
  for (const auto & s : scenes) {
    tags.push_back(s.tag);
  }
  const auto [train_idx, val_idx] = split_indices(tags, train_fraction, seed);
  SceneSplit out;
  for (auto i : train_idx) {
    out.train.push_back(scenes[i]);
  }
  for (auto i : val_idx) {
    out.val.push_back(scenes[i]);
  }
  return out;
}

}  // namespace gatekit
