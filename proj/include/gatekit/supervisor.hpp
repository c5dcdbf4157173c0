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

#ifndef GATEKIT__SUPERVISOR_HPP_
#define GATEKIT__SUPERVISOR_HPP_

#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gatekit/core.hpp"
#include "gatekit/gates.hpp"
#include "gatekit/meta_features.hpp"

namespace gatekit
{

struct TriggerConfig
{
  double confidence_threshold{0.4};
  std::set<ScenarioTag> semantic_tags{ScenarioTag::LeftTurn, ScenarioTag::CutIn,
    ScenarioTag::HighSpeed};
  double risk_accel_limit{8.0};      // m/s^2
  double risk_curvature_limit{0.5};  // 1/m

  /// Threshold in (0, 1], positive limits.
  void validate() const;
};

/// True on low confidence, a semantic tag, or any violation on the chosen
/// expert. The violation slots are read as extracted, so the feature
/// extraction limits should match the risk limits.
bool should_trigger(
  const GateDecision & decision, const Scene & scene, const MetaFeatureVector & features,
  const TriggerConfig & config);

enum class Intent
{
  Proceed,
  Yield,
  TurnNegotiation,
  MergeConflict,
  Unknown,
};
std::string_view to_string(Intent intent);
std::optional<Intent> parse_intent(std::string_view text);

struct SupervisorVerdict
{
  Intent intent{Intent::Unknown};
  double risk_score{0.0};
  std::optional<int> recommended_expert;
  std::string rationale;

  friend bool operator==(const SupervisorVerdict &, const SupervisorVerdict &) = default;
};

inline constexpr std::size_t kMaxSynopsisLength = 1200;

/// Plain-language scene summary, numbers at two decimals.
std::string synopsis(
  const Scene & scene, const MetaFeatureVector & features, const GateDecision & decision);

SupervisorVerdict rule_policy(
  const Scene & scene, const MetaFeatureVector & features, const GateDecision & decision);

struct EndpointConfig
{
  /// e.g. "http://127.0.0.1:8080/v1"; the request goes to {base_url}/chat/completions.
  std::string base_url;
  std::string model{"default"};
  double timeout_s{10.0};
  int max_in_flight{4};
  /// Environment variable holding the bearer token; unset means no header.
  std::string token_env{"GATEKIT_LLM_TOKEN"};

  void validate() const;
};

/// One request/response pair as sent and received.
struct LlmExchange
{
  std::string request;
  std::string response;
  double latency_ms{0.0};
  std::vector<std::string> warnings;
  bool fell_back{false};
};

/// The system prompt sent with every request.
std::string_view system_prompt();

/// Validates a reply's message content. Returns nullopt on any schema
/// violation; an out-of-range risk is clamped and noted in `warnings`.
std::optional<SupervisorVerdict> parse_verdict(
  const std::string & content, std::vector<std::string> & warnings);

/// Asks the endpoint once. Timeouts, transport errors and bad replies return
/// `fallback` with its rationale prefixed "fallback:".
SupervisorVerdict llm_policy(
  const std::string & synopsis_text, const EndpointConfig & endpoint,
  const SupervisorVerdict & fallback, LlmExchange * exchange = nullptr);

struct LlmJob
{
  std::string scene_id;
  std::string synopsis;
  SupervisorVerdict fallback;
};

/// Append-only JSONL audit log, safe to share between worker threads.
class AuditLog
{
public:
  AuditLog() = default;
  /// Truncates `path`. Throws DataError when it cannot be opened.
  explicit AuditLog(const std::string & path);

  void record(const std::string & scene_id, const LlmExchange & exchange,
    const SupervisorVerdict & verdict);
  std::vector<std::string> lines() const;

private:
  mutable std::mutex mutex_;
  std::string path_;
  std::vector<std::string> lines_;
};

/// Runs `jobs` with at most endpoint.max_in_flight concurrent requests.
/// Result i belongs to jobs[i] whatever the completion order.
std::vector<SupervisorVerdict> llm_batch(
  const std::vector<LlmJob> & jobs, const EndpointConfig & endpoint, AuditLog * audit = nullptr);

/// Replaces the chosen expert when the verdict recommends a different one.
GateDecision apply_override(
  const GateDecision & decision, const SupervisorVerdict & verdict, OverrideSource source);

}  // namespace gatekit

#endif  // GATEKIT__SUPERVISOR_HPP_
