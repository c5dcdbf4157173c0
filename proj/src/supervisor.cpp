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

#include "gatekit/supervisor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace gatekit
{

namespace
{

using nlohmann::json;

constexpr const char * kExpertNames[kNumExperts] = {"physics", "interactive", "curvature"};

std::string fixed2(double v)
{
  if (!std::isfinite(v)) {
    return "n/a";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  std::string s(buf);
  if (s == "-0.00") {
    s = "0.00";
  }
  return s;
}

std::string_view tag_phrase(ScenarioTag tag)
{
  switch (tag) {
    case ScenarioTag::Cruise: return "cruise";
    case ScenarioTag::LeftTurn: return "left turn";
    case ScenarioTag::CutIn: return "cut-in";
    case ScenarioTag::HighSpeed: return "high speed";
    case ScenarioTag::Occlusion: return "occlusion";
    case ScenarioTag::Curve: return "curve";
  }
  return "unknown";
}

constexpr std::array<Intent, 5> kIntents = {Intent::Proceed, Intent::Yield,
  Intent::TurnNegotiation, Intent::MergeConflict, Intent::Unknown};

json verdict_to_json(const SupervisorVerdict & v)
{
  json j;
  j["intent"] = std::string(to_string(v.intent));
  j["risk_score"] = v.risk_score;
  j["recommended_expert"] = v.recommended_expert ? json(*v.recommended_expert) : json(nullptr);
  j["rationale"] = v.rationale;
  return j;
}

SupervisorVerdict fall_back(SupervisorVerdict v, std::string_view why)
{
  v.rationale = "fallback: " + std::string(why) + "; " + v.rationale;
  return v;
}

struct Url
{
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

std::optional<Url> split_url(const std::string & base)
{
  const auto scheme = base.find("://");
  if (scheme == std::string::npos) {
    return std::nullopt;
  }
  const auto slash = base.find('/', scheme + 3);
  Url u;
  u.origin = base.substr(0, slash);
  u.path = slash == std::string::npos ? "" : base.substr(slash);
  while (!u.path.empty() && u.path.back() == '/') {
    u.path.pop_back();
  }
  return u;
}

}  // namespace

void TriggerConfig::validate() const
{
  if (!(confidence_threshold > 0.0 && confidence_threshold <= 1.0)) {
    throw ContractError("confidence_threshold must lie in (0, 1]");
  }
  if (!(risk_accel_limit > 0.0) || !(risk_curvature_limit > 0.0)) {
    throw ContractError("risk limits must be positive");
  }
}

bool should_trigger(
  const GateDecision & decision, const Scene & scene, const MetaFeatureVector & features,
  const TriggerConfig & config)
{
  if (decision.confidence < config.confidence_threshold) {
    return true;
  }
  if (config.semantic_tags.count(scene.tag) > 0) {
    return true;
  }
  const int c = decision.chosen;
  return features.diag(c, DiagSlot::AccelViolationRate) > 0.0 ||
         features.diag(c, DiagSlot::CurvatureViolationRate) > 0.0;
}

std::string_view to_string(Intent intent)
{
  switch (intent) {
    case Intent::Proceed: return "Proceed";
    case Intent::Yield: return "Yield";
    case Intent::TurnNegotiation: return "TurnNegotiation";
    case Intent::MergeConflict: return "MergeConflict";
    case Intent::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::optional<Intent> parse_intent(std::string_view text)
{
  for (auto i : kIntents) {
    if (to_string(i) == text) {
      return i;
    }
  }
  return std::nullopt;
}

std::string synopsis(
  const Scene & scene, const MetaFeatureVector & features, const GateDecision & decision)
{
  std::string s;
  s += "Scenario: " + std::string(tag_phrase(scene.tag)) + ".";
  s += " Ego speed " + fixed2(features.geo(GeoSlot::EgoSpeedLast)) + " m/s, heading change " +
    fixed2(features.geo(GeoSlot::HeadingChangeTotal)) + " rad over the history.";
  if (scene.neighbor_histories.empty()) {
    s += " There are no nearby agents.";
  } else {
    s += " " + std::to_string(scene.neighbor_histories.size()) + " nearby agent" +
      (scene.neighbor_histories.size() == 1 ? "" : "s") + ", closest at " +
      fixed2(features.geo(GeoSlot::MinNeighborDist)) + " m.";
  }
  s += scene.map.intersection ? " At an intersection." : " Not at an intersection.";
  s += " Lane curvature " + fixed2(scene.map.lane_curvature) + " 1/m.\n";
  for (int e = 0; e < kNumExperts; ++e) {
    s += std::string(kExpertNames[e]) + ": uncertainty " +
      fixed2(features.diag(e, DiagSlot::McVarianceMean)) + ", instability " +
      fixed2(features.diag(e, DiagSlot::StabilityDevMean)) + ", accel violations " +
      fixed2(features.diag(e, DiagSlot::AccelViolationRate)) + ", curvature violations " +
      fixed2(features.diag(e, DiagSlot::CurvatureViolationRate)) + ".\n";
  }
  s += "Gate scores:";
  for (int e = 0; e < kNumExperts; ++e) {
    s += std::string(e == 0 ? " " : ", ") + kExpertNames[e] + " " +
      fixed2(decision.scores[static_cast<std::size_t>(e)]);
  }
  s += ". Gate picks " + std::string(kExpertNames[decision.chosen]) + " with confidence " +
    fixed2(decision.confidence) + ".";
  if (s.size() > kMaxSynopsisLength) {
    s.resize(kMaxSynopsisLength);
  }
  return s;
}

SupervisorVerdict rule_policy(
  const Scene & scene, const MetaFeatureVector & features, const GateDecision & decision)
{
  SupervisorVerdict v;
  const double min_dist = features.geo(GeoSlot::MinNeighborDist);
  if (scene.tag == ScenarioTag::CutIn || min_dist < 10.0) {
    v.intent = Intent::MergeConflict;
    v.recommended_expert = kInteractiveExpert;
    v.risk_score = min_dist > 0.0 ? std::clamp(10.0 / min_dist, 0.0, 1.0) : 1.0;
    v.rationale = "merge conflict, closest agent at " + fixed2(min_dist) + " m";
    return v;
  }
  if (scene.tag == ScenarioTag::LeftTurn || scene.map.intersection) {
    double lowest = features.diag(0, DiagSlot::CurvatureViolationRate);
    for (int e = 1; e < kNumExperts; ++e) {
      lowest = std::min(lowest, features.diag(e, DiagSlot::CurvatureViolationRate));
    }
    // Ties go to the gate's own choice, then to the higher gate score.
    int pick = -1;
    for (int e = 0; e < kNumExperts; ++e) {
      if (features.diag(e, DiagSlot::CurvatureViolationRate) > lowest) {
        continue;
      }
      if (e == decision.chosen) {
        pick = e;
        break;
      }
      if (pick < 0 || decision.scores[static_cast<std::size_t>(e)] >
        decision.scores[static_cast<std::size_t>(pick)])
      {
        pick = e;
      }
    }
    v.intent = Intent::TurnNegotiation;
    v.recommended_expert = pick;
    v.risk_score = std::clamp(1.0 - decision.confidence, 0.0, 1.0);
    v.rationale = "turn negotiation, fewest curvature violations from " +
      std::string(kExpertNames[pick]);
    return v;
  }
  if (scene.tag == ScenarioTag::HighSpeed &&
    features.diag(decision.chosen, DiagSlot::AccelViolationRate) > 0.0)
  {
    v.intent = Intent::Yield;
    v.recommended_expert = kPhysicsExpert;
    v.risk_score = std::max(0.8, std::clamp(1.0 - decision.confidence, 0.0, 1.0));
    v.rationale = "high speed with acceleration violations on " +
      std::string(kExpertNames[decision.chosen]);
    return v;
  }
  v.intent = Intent::Proceed;
  v.risk_score = std::clamp(1.0 - decision.confidence, 0.0, 1.0);
  v.rationale = "no rule applies";
  return v;
}

void EndpointConfig::validate() const
{
  if (!split_url(base_url)) {
    throw ContractError("endpoint base_url needs a scheme, got '" + base_url + "'");
  }
  if (!(timeout_s > 0.0)) {
    throw ContractError("endpoint timeout must be positive");
  }
  if (max_in_flight < 1) {
    throw ContractError("endpoint max_in_flight must be >= 1");
  }
}

std::string_view system_prompt()
{
  return "You review a trajectory forecasting gate for an autonomous vehicle. "
         "Read the scene summary and reply with one JSON object and nothing else, with "
         "exactly these keys: "
         "\"intent\" (one of \"Proceed\", \"Yield\", \"TurnNegotiation\", \"MergeConflict\", "
         "\"Unknown\"), "
         "\"risk_score\" (number from 0 to 1), "
         "\"recommended_expert\" (0 for physics, 1 for interactive, 2 for curvature, or null "
         "to keep the gate's choice), "
         "\"rationale\" (one short sentence).";
}

std::optional<SupervisorVerdict> parse_verdict(
  const std::string & content, std::vector<std::string> & warnings)
{
  const json j = json::parse(content, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.size() != 4) {
    return std::nullopt;
  }
  for (const char * key : {"intent", "risk_score", "recommended_expert", "rationale"}) {
    if (!j.contains(key)) {
      return std::nullopt;
    }
  }
  const auto & intent = j["intent"];
  const auto & risk = j["risk_score"];
  const auto & expert = j["recommended_expert"];
  const auto & rationale = j["rationale"];
  if (!intent.is_string() || !risk.is_number() || !rationale.is_string()) {
    return std::nullopt;
  }
  SupervisorVerdict v;
  const auto parsed = parse_intent(intent.get<std::string>());
  if (!parsed) {
    return std::nullopt;
  }
  v.intent = *parsed;
  if (!expert.is_null()) {
    if (!expert.is_number_integer()) {
      return std::nullopt;
    }
    const auto e = expert.get<long long>();
    if (e < 0 || e >= kNumExperts) {
      return std::nullopt;
    }
    v.recommended_expert = static_cast<int>(e);
  }
  v.risk_score = risk.get<double>();
  if (v.risk_score < 0.0 || v.risk_score > 1.0) {
    warnings.push_back("risk_score " + risk.dump() + " clamped to [0, 1]");
    v.risk_score = std::clamp(v.risk_score, 0.0, 1.0);
  }
  v.rationale = rationale.get<std::string>();
  return v;
}

SupervisorVerdict llm_policy(
  const std::string & synopsis_text, const EndpointConfig & endpoint,
  const SupervisorVerdict & fallback, LlmExchange * exchange)
{
  LlmExchange local;
  LlmExchange & ex = exchange != nullptr ? *exchange : local;
  ex = LlmExchange{};

  const auto url = split_url(endpoint.base_url);
  if (!url) {
    ex.fell_back = true;
    return fall_back(fallback, "bad endpoint url");
  }

  json body;
  body["model"] = endpoint.model;
  body["temperature"] = 0;
  body["messages"] = json::array({
    {{"role", "system"}, {"content", std::string(system_prompt())}},
    {{"role", "user"}, {"content", synopsis_text}}});
  body["response_format"] = {{"type", "json_object"}};
  ex.request = body.dump();

  httplib::Client client(url->origin);
  const auto secs = static_cast<time_t>(endpoint.timeout_s);
  const auto usecs = static_cast<time_t>((endpoint.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (const char * token = std::getenv(endpoint.token_env.c_str()); token != nullptr && *token) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto res = client.Post(url->path + "/chat/completions", headers, ex.request, "application/json");
  ex.latency_ms = std::chrono::duration<double, std::milli>(
    std::chrono::steady_clock::now() - t0).count();

  if (!res) {
    ex.fell_back = true;
    return fall_back(fallback, "transport error (" + httplib::to_string(res.error()) + ")");
  }
  ex.response = res->body;
  if (res->status != 200) {
    ex.fell_back = true;
    return fall_back(fallback, "http status " + std::to_string(res->status));
  }
  const json reply = json::parse(res->body, nullptr, false);
  const json * content = nullptr;
  if (!reply.is_discarded() && reply.is_object() && reply.contains("choices") &&
    reply["choices"].is_array() && !reply["choices"].empty())
  {
    const auto & first = reply["choices"][0];
    if (first.is_object() && first.contains("message") && first["message"].is_object() &&
      first["message"].contains("content") && first["message"]["content"].is_string())
    {
      content = &first["message"]["content"];
    }
  }
  if (content == nullptr) {
    ex.fell_back = true;
    return fall_back(fallback, "reply is not a chat completion");
  }
  auto verdict = parse_verdict(content->get<std::string>(), ex.warnings);
  if (!verdict) {
    ex.fell_back = true;
    return fall_back(fallback, "reply does not match the verdict schema");
  }
  return *verdict;
}

AuditLog::AuditLog(const std::string & path)
: path_(path)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw DataError("cannot open audit log " + path);
  }
}

void AuditLog::record(
  const std::string & scene_id, const LlmExchange & exchange, const SupervisorVerdict & verdict)
{
  json j;
  j["scene_id"] = scene_id;
  j["request"] = exchange.request;
  j["response"] = exchange.response;
  j["verdict"] = verdict_to_json(verdict);
  j["latency_ms"] = exchange.latency_ms;
  j["fallback"] = exchange.fell_back;
  if (!exchange.warnings.empty()) {
    j["warnings"] = exchange.warnings;
  }
  const std::string line = j.dump();
  std::lock_guard<std::mutex> lock(mutex_);
  lines_.push_back(line);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    out << line << '\n';
  }
}

std::vector<std::string> AuditLog::lines() const
{
  std::lock_guard<std::mutex> lock(mutex_);
  return lines_;
}

std::vector<SupervisorVerdict> llm_batch(
  const std::vector<LlmJob> & jobs, const EndpointConfig & endpoint, AuditLog * audit)
{
  std::vector<SupervisorVerdict> out(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        LlmExchange ex;
        out[i] = llm_policy(jobs[i].synopsis, endpoint, jobs[i].fallback, &ex);
        if (audit != nullptr) {
          audit->record(jobs[i].scene_id, ex, out[i]);
        }
      }
    };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(endpoint.max_in_flight, 1)),
      jobs.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < n; ++t) {
    threads.emplace_back(worker);
  }
  for (auto & t : threads) {
    t.join();
  }
  return out;
}

GateDecision apply_override(
  const GateDecision & decision, const SupervisorVerdict & verdict, OverrideSource source)
{
  GateDecision out = decision;
  out.overridden = false;
  out.override_source = OverrideSource::None;
  if (verdict.recommended_expert && *verdict.recommended_expert != decision.chosen) {
    out.chosen = *verdict.recommended_expert;
    out.overridden = true;
    out.override_source = source;
  }
  return out;
}

}  // namespace gatekit
