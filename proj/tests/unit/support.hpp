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

#ifndef GATEKIT_TESTS__SUPPORT_HPP_
#define GATEKIT_TESTS__SUPPORT_HPP_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gatekit/core.hpp"
#include "gatekit/random.hpp"

namespace gatekit::testing
{

inline Trajectory from_points(const std::vector<Vec2> & pts, double rate = 20.0, double t0 = 0.0)
{
  std::vector<AgentState> states;
  for (const auto & p : pts) {
    states.push_back({p.x, p.y, 0.0, 0.0, 0.0});
  }
  return Trajectory(std::move(states), rate, t0);
}

/// Constant-velocity motion sampled at `rate` for k = first .. first+n-1.
inline Trajectory straight(Vec2 p0, Vec2 v, std::size_t n, int first = 0, double rate = 20.0)
{
  std::vector<AgentState> states;
  const double dt = 1.0 / rate;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = (first + static_cast<double>(k)) * dt;
    states.push_back({p0.x + v.x * t, p0.y + v.y * t, v.x, v.y, std::atan2(v.y, v.x)});
  }
  return Trajectory(std::move(states), rate, first * dt);
}

/// Constant-speed arc of curvature `kappa` starting at the origin heading +x.
inline Trajectory arc(double speed, double kappa, std::size_t n, int first = 0, double rate = 20.0)
{
  std::vector<AgentState> states;
  const double dt = 1.0 / rate;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = (first + static_cast<double>(k)) * dt;
    const double th = kappa * speed * t;
    states.push_back({std::sin(th) / kappa, (1.0 - std::cos(th)) / kappa, speed * std::cos(th),
        speed * std::sin(th), th});
  }
  return Trajectory(std::move(states), rate, first * dt);
}

/// History of 40 states ending at t = 0 and the 80-state future after it.
inline Scene line_scene(Vec2 v, ScenarioTag tag = ScenarioTag::Cruise, std::string id = "s")
{
  Scene s;
  s.id = std::move(id);
  s.tag = tag;
  s.ego_history = straight({0.0, 0.0}, v, 40, -39);
  s.ground_truth_future = straight({0.0, 0.0}, v, 80, 1);
  return s;
}

inline Trajectory random_trajectory(Rng & rng, std::size_t n)
{
  std::vector<Vec2> pts;
  for (std::size_t k = 0; k < n; ++k) {
    pts.push_back({uniform(rng, -50.0, 50.0), uniform(rng, -50.0, 50.0)});
  }
  return from_points(pts);
}

inline std::string read_file(const std::filesystem::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path & p, const std::string & text)
{
  std::ofstream(p, std::ios::binary) << text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
  explicit TempDir(const std::string & name)
  : path_(std::filesystem::temp_directory_path() / ("gatekit-" + name))
  {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path operator/(const std::string & leaf) const { return path_ / leaf; }
  const std::filesystem::path & path() const { return path_; }

private:
  std::filesystem::path path_;
};

}  // namespace gatekit::testing

#endif  // GATEKIT_TESTS__SUPPORT_HPP_
