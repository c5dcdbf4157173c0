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

#include "gatekit/experts.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace gatekit
{

Expert::Expert(ExpertId id, ExpertConfig config)
: id_(std::move(id)), config_(config)
{
  if (id_.cost_weight < 1.0) {
    throw ContractError("expert cost weight must be >= 1");
  }
  if (config_.rollout_steps < 1) {
    throw ContractError("rollout_steps must be positive");
  }
}

namespace
{

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

Trajectory constant_velocity_rollout(
  Vec2 p, Vec2 v, double fallback_heading, double rate_hz, std::size_t steps)
{
  const double dt = 1.0 / rate_hz;
  const double heading = norm(v) > 1e-9 ? std::atan2(v.y, v.x) : fallback_heading;
  std::vector<AgentState> out;
  out.reserve(steps);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    out.push_back({p.x + v.x * t, p.y + v.y * t, v.x, v.y, heading});
  }
  return Trajectory(std::move(out), rate_hz, dt);
}

double jitter_for(const ExpertConfig & cfg, int expert_index)
{
  if (cfg.zero_jitter_expert && *cfg.zero_jitter_expert == expert_index) {
    return 0.0;
  }
  return cfg.jitter_scale;
}

}  // namespace

// ---------------------------------------------------------------------------
// Physics

PhysicsExpert::PhysicsExpert(ExpertConfig config)
: Expert({kPhysicsExpert, "physics", 1.0}, config) {}

PhysicsExpert::Filtered PhysicsExpert::filter(
  const Trajectory & history, double process_noise) const
{
  const double dt = history.dt();
  Mat4 F = Mat4::Identity();
  F(0, 2) = dt;
  F(1, 3) = dt;
  Mat4 Q = Mat4::Zero();
  const double q = process_noise;
  for (int axis = 0; axis < 2; ++axis) {
    Q(axis, axis) = q * dt * dt * dt / 3.0;
    Q(axis, axis + 2) = q * dt * dt / 2.0;
    Q(axis + 2, axis) = q * dt * dt / 2.0;
    Q(axis + 2, axis + 2) = q * dt;
  }
  const double rp = config_.meas_position_std * config_.meas_position_std;
  const double rv = config_.meas_velocity_std * config_.meas_velocity_std;
  const Vec4 r_diag(rp, rp, rv, rv);
  const Mat4 R = r_diag.asDiagonal();

  const auto & s0 = history.front();
  Vec4 x(s0.x, s0.y, s0.vx, s0.vy);
  Mat4 P = R;
  for (std::size_t k = 1; k < history.size(); ++k) {
    x = F * x;
    P = F * P * F.transpose() + Q;
    const auto & s = history[k];
    const Vec4 z(s.x, s.y, s.vx, s.vy);
    const Mat4 S = P + R;
    const Mat4 K = P * S.inverse();
    x = x + K * (z - x);
    P = (Mat4::Identity() - K) * P;
    P = 0.5 * (P + P.transpose());
  }
  Filtered out;
  const double heading = std::hypot(x(2), x(3)) > 1e-9 ? std::atan2(x(3), x(2)) :
    history.back().heading;
  out.state = {x(0), x(1), x(2), x(3), heading};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      out.covariance[static_cast<std::size_t>(r * 4 + c)] = P(r, c);
    }
  }
  return out;
}

Prediction PhysicsExpert::predict(const Scene & scene) const
{
  const auto f = filter(scene.ego_history, config_.process_noise);
  return {constant_velocity_rollout(
      f.state.position(), f.state.velocity(), f.state.heading, scene.ego_history.rate_hz(),
      config_.rollout_steps),
    false, 0};
}

Prediction PhysicsExpert::predict_perturbed(const Scene & scene, Rng & rng, double jitter) const
{
  // Process-noise resampling: a lognormal draw of the noise intensity, then an
  // initial state drawn from the resulting posterior.
  const double q = config_.process_noise *
    std::exp(gaussian(rng, config_.process_noise_log_std * jitter));
  const auto f = filter(scene.ego_history, q);
  Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>> P(f.covariance.data());
  const Eigen::LLT<Mat4> llt(Mat4(P) + 1e-12 * Mat4::Identity());
  Vec4 n;
  for (int i = 0; i < 4; ++i) {
    n(i) = gaussian(rng, 1.0);
  }
  const Vec4 d = jitter * (Mat4(llt.matrixL()) * n);
  const Vec2 p{f.state.x + d(0), f.state.y + d(1)};
  const Vec2 v{f.state.vx + d(2), f.state.vy + d(3)};
  return {constant_velocity_rollout(p, v, f.state.heading, scene.ego_history.rate_hz(),
      config_.rollout_steps), false, 0};
}

// ---------------------------------------------------------------------------
// Curvature

namespace
{

/// Position after `tau` seconds of constant speed and yaw rate.
Vec2 advance(Vec2 p, double heading, double speed, double yaw_rate, double tau)
{
  if (std::abs(yaw_rate) < 1e-12) {
    return p + (speed * tau) * Vec2{std::cos(heading), std::sin(heading)};
  }
  const double r = speed / yaw_rate;
  const double th = heading + yaw_rate * tau;
  return p + Vec2{r * (std::sin(th) - std::sin(heading)), r * (std::cos(heading) - std::cos(th))};
}

}  // namespace

CurvatureExpert::CurvatureExpert(ExpertConfig config)
: Expert({kCurvatureExpert, "curvature", 3.0}, config) {}

CurvatureExpert::Fit CurvatureExpert::fit(const Trajectory & history) const
{
  if (history.size() < 3) {
    throw ContractError("curvature expert needs at least 3 history states");
  }
  const std::size_t w = std::min(config_.fit_window, history.size());
  const std::size_t first = history.size() - w;

  Fit out;
  out.anchor = history.back().position();
  double speed_sum = 0.0;
  for (std::size_t k = first; k < history.size(); ++k) {
    speed_sum += history[k].speed();
  }
  out.speed = speed_sum / static_cast<double>(w);
  if (out.speed < config_.min_moving_speed) {
    out.degenerate = true;
    out.speed = 0.0;
    out.heading = history.back().heading;
    return out;
  }

  // Least-squares line through the unwrapped headings of the window.
  std::vector<double> theta(w);
  theta[0] = history[first].heading;
  for (std::size_t i = 1; i < w; ++i) {
    const double step = normalize_angle(history[first + i].heading - history[first + i - 1].heading);
    theta[i] = theta[i - 1] + step;
  }
  const double dt = history.dt();
  double t_mean = 0.0;
  double th_mean = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    t_mean += static_cast<double>(i) * dt;
    th_mean += theta[i];
  }
  t_mean /= static_cast<double>(w);
  th_mean /= static_cast<double>(w);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    const double dx = static_cast<double>(i) * dt - t_mean;
    sxx += dx * dx;
    sxy += dx * (theta[i] - th_mean);
  }
  double slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    const double r = theta[i] - (th_mean + slope * (static_cast<double>(i) * dt - t_mean));
    rss += r * r;
  }
  const double dof = static_cast<double>(w) - 2.0;
  const double stderr_slope = dof > 0.0 ? std::sqrt(rss / dof / sxx) : 0.0;
  const double t_last = static_cast<double>(w - 1) * dt;
  if (std::abs(slope) <= config_.yaw_significance * stderr_slope) {
    slope = 0.0;
    out.heading = normalize_angle(th_mean);
  } else {
    out.heading = normalize_angle(th_mean + slope * (t_last - t_mean));
  }
  out.yaw_rate = slope;

  // Anchor on the window's positions carried forward along the fitted arc
  // rather than the last sample alone.
  Vec2 anchor{0.0, 0.0};
  for (std::size_t k = first; k < history.size(); ++k) {
    const double tau = static_cast<double>(history.size() - 1 - k) * dt;
    const double th0 = out.heading - out.yaw_rate * tau;
    anchor = anchor + advance(history[k].position(), th0, out.speed, out.yaw_rate, tau);
  }
  out.anchor = (1.0 / static_cast<double>(w)) * anchor;
  return out;
}

Trajectory CurvatureExpert::rollout(const Fit & fit, double rate_hz) const
{
  const double dt = 1.0 / rate_hz;
  std::vector<AgentState> out;
  out.reserve(config_.rollout_steps);
  for (std::size_t k = 1; k <= config_.rollout_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double th = fit.heading + fit.yaw_rate * t;
    const Vec2 p = advance(fit.anchor, fit.heading, fit.speed, fit.yaw_rate, t);
    out.push_back({p.x, p.y, fit.speed * std::cos(th), fit.speed * std::sin(th), th});
  }
  return Trajectory(std::move(out), rate_hz, dt);
}

Prediction CurvatureExpert::predict(const Scene & scene) const
{
  const auto f = fit(scene.ego_history);
  return {rollout(f, scene.ego_history.rate_hz()), f.degenerate, 0};
}

Prediction CurvatureExpert::predict_perturbed(const Scene & scene, Rng & rng, double jitter) const
{
  auto f = fit(scene.ego_history);
  const double rel = config_.yaw_speed_jitter * jitter;
  f.yaw_rate *= 1.0 + gaussian(rng, rel);
  f.speed *= 1.0 + gaussian(rng, rel);
  f.speed = std::max(0.0, f.speed);
  return {rollout(f, scene.ego_history.rate_hz()), f.degenerate, 0};
}

// ---------------------------------------------------------------------------
// Interactive

InteractiveExpert::InteractiveExpert(ExpertConfig config)
: Expert({kInteractiveExpert, "interactive", 10.0}, config), base_(config) {}

Prediction InteractiveExpert::respond(
  const Scene & scene, const CurvatureExpert::Fit & fit, double react_distance) const
{
  const double rate = scene.ego_history.rate_hz();
  Trajectory base = base_.rollout(fit, rate);
  const auto & ego_now = scene.ego_history.back();
  const Vec2 left{-std::sin(fit.heading), std::cos(fit.heading)};

  double offset = 0.0;
  int reactions = 0;
  for (const auto & nb : scene.neighbor_histories) {
    const auto & n = nb.back();
    const Vec2 rel = n.position() - ego_now.position();
    if (norm(rel) > config_.ignore_beyond) {
      continue;
    }
    // Neighbor velocity from tracked positions over the fit window.
    const std::size_t span = std::min(config_.fit_window, nb.size() - 1);
    const Vec2 nv = span == 0 ? n.velocity() :
      (1.0 / (static_cast<double>(span) * nb.dt())) * (n.position() - nb[nb.size() - 1 - span].position());
    double dmin = norm(rel);
    for (std::size_t k = 0; k < base.size(); ++k) {
      const double t = base.time_at(k);
      const Vec2 np = n.position() + t * nv;
      dmin = std::min(dmin, norm(base[k].position() - np));
    }
    if (dmin >= react_distance) {
      continue;
    }
    const double intrusion = (1.0 - dmin / react_distance) * (1.0 - dmin / react_distance);
    const double side = rel.x * left.x + rel.y * left.y >= 0.0 ? 1.0 : -1.0;
    offset -= side * config_.max_evasion * intrusion;
    ++reactions;
  }
  offset = std::clamp(offset, -config_.max_evasion, config_.max_evasion);
  if (reactions == 0 || offset == 0.0) {
    return {std::move(base), fit.degenerate, reactions};
  }

  std::vector<AgentState> out;
  out.reserve(base.size());
  for (std::size_t k = 0; k < base.size(); ++k) {
    const auto & s = base[k];
    const double u = base.time_at(k) / config_.evasion_ramp_s;
    double shift = 0.0;
    double shift_rate = 0.0;
    if (u >= 1.0) {
      shift = offset;
    } else if (u > 0.0) {
      shift = offset * u * u * (3.0 - 2.0 * u);
      shift_rate = offset * 6.0 * u * (1.0 - u) / config_.evasion_ramp_s;
    }
    const Vec2 nrm{-std::sin(s.heading), std::cos(s.heading)};
    const double vx = s.vx + shift_rate * nrm.x;
    const double vy = s.vy + shift_rate * nrm.y;
    const double heading = std::hypot(vx, vy) > 1e-9 ? std::atan2(vy, vx) : s.heading;
    out.push_back({s.x + shift * nrm.x, s.y + shift * nrm.y, vx, vy, heading});
  }
  return {Trajectory(std::move(out), rate, base.start_time()), fit.degenerate, reactions};
}

Prediction InteractiveExpert::predict(const Scene & scene) const
{
  return respond(scene, base_.fit(scene.ego_history), config_.react_distance);
}

Prediction InteractiveExpert::predict_perturbed(
  const Scene & scene, Rng & rng, double jitter) const
{
  auto f = base_.fit(scene.ego_history);
  const double rel = config_.yaw_speed_jitter * jitter;
  f.yaw_rate *= 1.0 + gaussian(rng, rel);
  f.speed = std::max(0.0, f.speed * (1.0 + gaussian(rng, rel)));
  const double spread = config_.react_distance_jitter * jitter;
  const double d = config_.react_distance * (1.0 + uniform(rng, -1.0, 1.0) * spread);
  return respond(scene, f, d);
}

// ---------------------------------------------------------------------------
// Pool

ExpertPool::ExpertPool(std::vector<std::shared_ptr<const Expert>> experts)
: experts_(std::move(experts))
{
  if (experts_.empty() || experts_.size() > static_cast<std::size_t>(kNumExperts)) {
    throw ContractError("expert pool holds 1 to 3 experts");
  }
  for (std::size_t i = 0; i < experts_.size(); ++i) {
    for (std::size_t j = i + 1; j < experts_.size(); ++j) {
      if (experts_[i]->id().index == experts_[j]->id().index) {
        throw ContractError("duplicate expert index in pool");
      }
    }
  }
}

ExpertPool ExpertPool::standard(const ExpertConfig & config)
{
  return ExpertPool({std::make_shared<PhysicsExpert>(config),
      std::make_shared<InteractiveExpert>(config), std::make_shared<CurvatureExpert>(config)});
}

const Expert & ExpertPool::at(std::size_t i) const
{
  if (i >= experts_.size()) {
    throw ContractError("expert slot " + std::to_string(i) + " out of range");
  }
  return *experts_[i];
}

std::vector<ExpertId> ExpertPool::ids() const
{
  std::vector<ExpertId> out;
  for (const auto & e : experts_) {
    out.push_back(e->id());
  }
  return out;
}

Trajectory predict_physics(const Scene & scene, const ExpertConfig & config)
{
  return PhysicsExpert(config).predict(scene).trajectory;
}

Trajectory predict_curvature(const Scene & scene, const ExpertConfig & config)
{
  return CurvatureExpert(config).predict(scene).trajectory;
}

Trajectory predict_interactive(const Scene & scene, const ExpertConfig & config)
{
  return InteractiveExpert(config).predict(scene).trajectory;
}

std::vector<Trajectory> predict_stochastic(
  const Expert & expert, const Scene & scene, int passes, std::uint64_t seed)
{
  if (passes < 2) {
    throw ContractError("stochastic prediction needs at least 2 passes, got " +
      std::to_string(passes));
  }
  const double jitter = jitter_for(expert.config(), expert.id().index);
  // Common random numbers across experts: the interactive expert draws the
  // same fit jitter as the curvature expert before its own reaction jitter.
  const std::uint64_t base = derive_seed(seed ^ hash_string(scene.id), 101);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(passes));
  for (int p = 0; p < passes; ++p) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(p)));
    out.push_back(expert.predict_perturbed(scene, rng, jitter).trajectory);
  }
  return out;
}

}  // namespace gatekit
