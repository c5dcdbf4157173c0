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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gatekit/experts.hpp"
#include "gatekit/meta_features.hpp"
#include "gatekit/scenario_gen.hpp"

namespace gatekit
{
namespace
{

bool same_scene(const Scene & a, const Scene & b)
{
  return a.id == b.id && a.tag == b.tag && a.ego_history == b.ego_history &&
         a.neighbor_histories == b.neighbor_histories &&
         a.ground_truth_future == b.ground_truth_future &&
         a.map.lane_curvature == b.map.lane_curvature && a.map.intersection == b.map.intersection;
}

GeneratorConfig noise_free(ScenarioTag tag, int count)
{
  auto cfg = GeneratorConfig::single_family(tag, count);
  cfg.noise_position_std = 0.0;
  cfg.noise_velocity_std = 0.0;
  return cfg;
}

TEST(Generate, CountsMatchConfig)
{
  auto cfg = GeneratorConfig::defaults();
  cfg.counts[ScenarioTag::Curve] = 7;
  const auto scenes = generate(cfg);
  EXPECT_EQ(static_cast<int>(scenes.size()), cfg.total_count());
  std::map<ScenarioTag, int> seen;
  std::set<std::string> ids;
  for (const auto & s : scenes) {
    ++seen[s.tag];
    ids.insert(s.id);
    EXPECT_NO_THROW(validate_scene(s, cfg.horizons));
  }
  EXPECT_EQ(ids.size(), scenes.size());
  EXPECT_EQ(seen[ScenarioTag::Curve], 7);
  EXPECT_EQ(seen[ScenarioTag::CutIn], 100);
}

TEST(Generate, ZeroTotalCountThrows)
{
  auto cfg = GeneratorConfig::single_family(ScenarioTag::Cruise, 0);
  EXPECT_THROW(generate(cfg), ContractError);
}

TEST(Generate, NegativeNoiseThrows)
{
  auto cfg = GeneratorConfig::defaults();
  cfg.noise_position_std = -0.1;
  EXPECT_THROW(generate(cfg), ContractError);
}

TEST(Generate, SameSeedSameScenes)
{
  const auto a = generate(GeneratorConfig::defaults());
  const auto b = generate(GeneratorConfig::defaults());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(same_scene(a[i], b[i])) << a[i].id;
  }
}

TEST(Generate, DifferentSeedDifferentScenes)
{
  auto cfg = GeneratorConfig::single_family(ScenarioTag::Cruise, 5, 43);
  const auto a = generate(GeneratorConfig::single_family(ScenarioTag::Cruise, 5, 42));
  const auto b = generate(cfg);
  EXPECT_FALSE(same_scene(a[0], b[0]));
}

TEST(Generate, SingleCruiseSceneIsLinearWithBoundedJitter)
{
  const auto cfg = GeneratorConfig::single_family(ScenarioTag::Cruise, 1);
  const auto scenes = generate(cfg);
  ASSERT_EQ(scenes.size(), 1u);
  const auto & s = scenes[0];
  const auto & fut = s.ground_truth_future;
  const double dt = fut.dt();
  const Vec2 v = (1.0 / dt) * (fut[1].position() - fut[0].position());
  const auto line = [&](double t) { return fut[0].position() + (t - fut.start_time()) * v; };
  for (std::size_t k = 0; k < fut.size(); ++k) {
    const Vec2 d = fut[k].position() - line(fut.time_at(k));
    EXPECT_LT(norm(d), 1e-9);
  }
  const double bound = 4.0 * cfg.noise_position_std + 1e-9;
  for (std::size_t k = 0; k < s.ego_history.size(); ++k) {
    const Vec2 d = s.ego_history[k].position() - line(s.ego_history.time_at(k));
    EXPECT_LE(std::abs(d.x), bound);
    EXPECT_LE(std::abs(d.y), bound);
  }
}

TEST(Generate, NoiseFreeCruiseIsExactlyConstantVelocity)
{
  const auto scenes = generate(noise_free(ScenarioTag::Cruise, 100));
  for (const auto & s : scenes) {
    const auto & h = s.ego_history;
    const Vec2 v = (1.0 / h.dt()) * (h.back().position() - h[h.size() - 2].position());
    const Vec2 last = h.back().position();
    std::vector<AgentState> cv;
    for (std::size_t k = 1; k <= s.ground_truth_future.size(); ++k) {
      const Vec2 p = last + (static_cast<double>(k) * h.dt()) * v;
      cv.push_back({p.x, p.y, v.x, v.y, 0.0});
    }
    const Trajectory pred(cv, h.rate_hz(), h.dt());
    EXPECT_LT(fde(pred, s.ground_truth_future), 1e-9) << s.id;
  }
}

TEST(Generate, CurveFutureIsConstantSpeedArc)
{
  const auto scenes = generate(noise_free(ScenarioTag::Curve, 20));
  for (const auto & s : scenes) {
    const auto & f = s.ground_truth_future;
    const double step = norm(f[1].position() - f[0].position());
    for (std::size_t k = 2; k < f.size(); ++k) {
      EXPECT_NEAR(norm(f[k].position() - f[k - 1].position()), step, 1e-9);
      const double kappa = menger_curvature(
        f[k - 2].position(), f[k - 1].position(), f[k].position());
      EXPECT_NEAR(kappa, std::abs(s.map.lane_curvature), 1e-3 * std::abs(s.map.lane_curvature));
    }
  }
}

TEST(Generate, LeftTurnSweepsAQuarterTurnLeft)
{
  const auto scenes = generate(noise_free(ScenarioTag::LeftTurn, 20));
  for (const auto & s : scenes) {
    EXPECT_TRUE(s.map.intersection);
    const double sweep = normalize_angle(
      s.ground_truth_future.back().heading - s.ego_history.front().heading);
    EXPECT_NEAR(sweep, 0.5 * kPi, 1e-9) << s.id;
    // Trapezoid: the turn is slower than both entry and exit.
    const double entry = s.ego_history.back().speed();
    const double mid = s.ground_truth_future[40].speed();
    const double exit = s.ground_truth_future.back().speed();
    EXPECT_LT(mid, entry);
    EXPECT_LT(mid, exit);
  }
}

TEST(Generate, CutInHasConvergingNeighborAndLateralResponse)
{
  const auto scenes = generate(noise_free(ScenarioTag::CutIn, 30));
  for (const auto & s : scenes) {
    ASSERT_FALSE(s.neighbor_histories.empty());
    const auto & h = s.ego_history;
    const Vec2 heading{std::cos(h.back().heading), std::sin(h.back().heading)};
    const Vec2 left{-heading.y, heading.x};
    const auto lateral = [&](Vec2 p) {
        const Vec2 d = p - h.back().position();
        return d.x * left.x + d.y * left.y;
      };
    const double offset = lateral(s.ground_truth_future.back().position());
    EXPECT_GT(std::abs(offset), 0.5) << s.id;
    const auto & n = s.neighbor_histories[0];
    EXPECT_LT(std::abs(lateral(n.back().position())), std::abs(lateral(n.front().position())));
  }
}

TEST(Generate, HighSpeedIsStraightAtTheTopOfTheRange)
{
  const auto cfg = noise_free(ScenarioTag::HighSpeed, 20);
  const auto range = cfg.speed_range(ScenarioTag::HighSpeed);
  const auto cruise = default_speed_range(ScenarioTag::Cruise);
  EXPECT_GE(range.lo, cruise.hi);
  for (const auto & s : generate(cfg)) {
    const double v = s.ego_history.back().speed();
    EXPECT_GE(v, range.lo);
    EXPECT_LE(v, range.hi);
    const auto & f = s.ground_truth_future;
    EXPECT_LT(menger_curvature(f[0].position(), f[40].position(), f[79].position()), 1e-9);
  }
}

TEST(Generate, OcclusionHidesTheOlderHalfOfHistory)
{
  const auto scenes = generate(GeneratorConfig::single_family(ScenarioTag::Occlusion, 20));
  for (const auto & s : scenes) {
    const auto & h = s.ego_history;
    const std::size_t hidden = h.size() / 2;
    for (std::size_t k = 0; k < hidden; ++k) {
      EXPECT_EQ(h[k].vx, 0.0);
      EXPECT_EQ(h[k].vy, 0.0);
      EXPECT_EQ(h[k].position().x, h[hidden].position().x);
    }
    EXPECT_GT(h.back().speed(), 1.0);
  }
}

TEST(Split, EightyTwenty)
{
  const auto scenes = generate(GeneratorConfig::single_family(ScenarioTag::Cruise, 10));
  const auto sp = split(scenes, 0.8, 1);
  EXPECT_EQ(sp.train.size(), 8u);
  EXPECT_EQ(sp.val.size(), 2u);
}

TEST(Split, DisjointExhaustiveDeterministic)
{
  const auto scenes = generate(GeneratorConfig::defaults());
  const auto a = split(scenes, 0.7, 9);
  const auto b = split(scenes, 0.7, 9);
  std::multiset<std::string> ids;
  for (const auto & s : a.train) {
    ids.insert(s.id);
  }
  for (const auto & s : a.val) {
    ids.insert(s.id);
  }
  EXPECT_EQ(ids.size(), scenes.size());
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), scenes.size());
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].id, b.train[i].id);
  }
}

TEST(Split, StratifiedByTag)
{
  auto cfg = GeneratorConfig::single_family(ScenarioTag::Cruise, 50);
  cfg.counts[ScenarioTag::LeftTurn] = 50;
  const auto sp = split(generate(cfg), 0.8, 42);
  int cruise = 0;
  int left = 0;
  for (const auto & s : sp.train) {
    (s.tag == ScenarioTag::Cruise ? cruise : left) += 1;
  }
  EXPECT_NEAR(cruise, 40, 1);
  EXPECT_NEAR(left, 40, 1);
}

TEST(Split, StratificationHoldsForRandomMixes)
{
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScenarioTag> tags;
    std::uniform_int_distribution<int> size(2, 80);
    std::uniform_int_distribution<int> pick(0, 5);
    const int n = size(rng);
    for (int i = 0; i < n; ++i) {
      tags.push_back(kAllScenarioTags[static_cast<std::size_t>(pick(rng))]);
    }
    const double frac = uniform(rng, 0.1, 0.9);
    const auto [train, val] = split_indices(tags, frac, 5);
    EXPECT_EQ(train.size() + val.size(), tags.size());
    const double total_share = static_cast<double>(train.size()) / n;
    for (auto tag : kAllScenarioTags) {
      const auto members = std::count(tags.begin(), tags.end(), tag);
      const auto in_train = std::count_if(train.begin(), train.end(), [&](std::size_t i) {
            return tags[i] == tag;
          });
      EXPECT_LE(std::abs(static_cast<double>(in_train) - members * total_share), 1.0 + 1e-9);
    }
  }
}

TEST(Split, RejectsBadArguments)
{
  const auto scenes = generate(GeneratorConfig::single_family(ScenarioTag::Cruise, 3));
  EXPECT_THROW(split(scenes, 0.0, 1), ContractError);
  EXPECT_THROW(split(scenes, 1.0, 1), ContractError);
  EXPECT_THROW(split({scenes[0]}, 0.5, 1), ContractError);
}

TEST(Benchmark, OracleBeatsEverySingleExpert)
{
  const auto scenes = generate(GeneratorConfig::defaults());
  const auto pool = ExpertPool::standard();
  const Horizons hz;
  std::array<double, kNumExperts> col{};
  double oracle = 0.0;
  for (const auto & s : scenes) {
    double best = 1e300;
    for (int e = 0; e < kNumExperts; ++e) {
      const double f = fde(clamp_horizon(pool[static_cast<std::size_t>(e)].predict(s).trajectory,
          hz), s.ground_truth_future);
      col[static_cast<std::size_t>(e)] += f;
      best = std::min(best, f);
    }
    oracle += best;
  }
  for (double c : col) {
    EXPECT_LT(oracle, c);
  }
}

}  // namespace
}  // namespace gatekit
