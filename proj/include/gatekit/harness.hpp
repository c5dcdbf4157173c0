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

#ifndef GATEKIT__HARNESS_HPP_
#define GATEKIT__HARNESS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gatekit/core.hpp"
#include "gatekit/experts.hpp"
#include "gatekit/gates.hpp"
#include "gatekit/meta_features.hpp"
#include "gatekit/scenario_gen.hpp"
#include "gatekit/supervisor.hpp"

namespace gatekit
{

/// Rounds to 9 significant digits, the precision of every numeric file field.
double round_sig9(double v);
/// "%.9g".
std::string format_sig9(double v);

// ---------------------------------------------------------------------------
// Scene files

std::string scene_to_json_line(const Scene & scene);
/// Throws DataError with the reason when the line is not a valid scene.
Scene scene_from_json_line(const std::string & line, const Horizons & horizons = {});

struct LineError
{
  std::size_t line{0};  // 1-based
  std::string reason;
};

struct SceneFile
{
  std::vector<Scene> scenes;
  std::vector<LineError> rejected;
};

void write_scenes(const std::string & path, const std::vector<Scene> & scenes);
/// Blank lines are skipped; bad lines are rejected, not fatal. Throws
/// DataError when the file cannot be read.
SceneFile read_scenes(const std::string & path, const Horizons & horizons = {});

// ---------------------------------------------------------------------------
// Per-scene expert results and feature tables

struct SceneSample
{
  std::string id;
  ScenarioTag tag{ScenarioTag::Cruise};
  MetaFeatureVector features;
  ExpertScores fde{};
  ExpertScores ade{};
};

/// Runs every expert on every scene. Scenes that fail are skipped and named
/// in `failures` when it is given.
std::vector<SceneSample> compute_samples(
  const std::vector<Scene> & scenes, const ExpertPool & pool, std::uint64_t seed,
  const FeatureOptions & options = {}, std::vector<LineError> * failures = nullptr);

std::vector<TrainingSample> training_samples(const std::vector<SceneSample> & samples);

/// 36 columns, one per slot, header from feature_names().
void write_features_csv(const std::string & path, const std::vector<SceneSample> & samples);
/// scene_id, tag, then per-expert FDE; rows align with the features file.
void write_fde_csv(const std::string & path, const std::vector<SceneSample> & samples);
/// Joins the two files row by row. Throws DataError on header, width,
/// number, or row-count problems.
std::vector<SceneSample> read_feature_tables(
  const std::string & features_path, const std::string & fde_path);

// ---------------------------------------------------------------------------
// Oracle

struct OracleResult
{
  std::vector<int> index;
  double fde{0.0};
};

/// Per-row argmin (lowest index on ties) and the mean of the row minima.
OracleResult compute_oracle(const std::vector<std::vector<double>> & fde);
OracleResult compute_oracle(const std::vector<Scene> & scenes, const ExpertPool & pool);

/// Linear interpolation between order statistics; q in [0, 1].
double percentile(std::vector<double> values, double q);

// ---------------------------------------------------------------------------
// Evaluation

enum class SupervisorMode { Off, Rule, Llm };
std::string_view to_string(SupervisorMode mode);
SupervisorMode parse_supervisor_mode(std::string_view text);

struct SceneResult
{
  std::string id;
  ScenarioTag tag{ScenarioTag::Cruise};
  /// Scored for every expert, including ones a two-stage gate never ran.
  ExpertScores fde{};
  ExpertScores ade{};
  int oracle{0};
  GateDecision decision;
  bool triggered{false};
  bool llm_answered{false};
  double chosen_fde{0.0};
  double chosen_ade{0.0};
  double cost_spent{0.0};
  bool expensive_invoked{true};
};

struct AggregateBlock
{
  std::size_t scenes{0};
  ExpertScores mean_fde{};
  ExpertScores mean_ade{};
  double oracle_fde{0.0};
  /// Best single expert over the whole report; slices reuse it.
  int baseline_expert{0};
  double baseline_fde{0.0};
  double gate_fde{0.0};
  double gate_ade{0.0};
  /// Absent when the baseline does not beat the oracle.
  std::optional<double> orr;
  double p95_fde{0.0};
  double selection_accuracy{0.0};
  ExpertScores utilization{};
  double trigger_rate{0.0};
  double llm_answer_rate{0.0};
  double override_rate{0.0};
  double rule_override_rate{0.0};
  double llm_override_rate{0.0};
  double cost_fraction{0.0};
  double expensive_invocation_rate{0.0};
};

struct Fingerprint
{
  std::string strategy;
  std::string preset;
  std::uint64_t train_seed{0};
  std::uint64_t eval_seed{0};
  std::string supervisor;
};

struct EvaluationReport
{
  std::vector<SceneResult> per_scene;
  AggregateBlock aggregate;
  std::map<ScenarioTag, AggregateBlock> slices;
  std::vector<LineError> failures;  // line = position in the input
  Fingerprint fingerprint;
  /// Wall-clock fields; excluded from determinism comparisons.
  std::map<std::string, std::string> metadata;
};

struct EvalOptions
{
  SupervisorMode supervisor{SupervisorMode::Off};
  TriggerConfig trigger;
  EndpointConfig endpoint;
  FeatureOptions features;
  std::uint64_t seed{42};
  /// 0 picks the hardware concurrency.
  int workers{0};
  /// Fraction of failed scenes above which the run aborts.
  double max_failure_fraction{0.1};
  AuditLog * audit{nullptr};
};

/// Throws DataError when more than max_failure_fraction of the scenes fail.
EvaluationReport evaluate(
  const std::vector<Scene> & scenes, const ExpertPool & pool, const GateModel & model,
  const EvalOptions & options);

/// Fills aggregate and slices from per_scene.
void aggregate_report(EvaluationReport & report, const ExpertPool & pool);

std::string report_to_json(const EvaluationReport & report, bool with_metadata = true);
EvaluationReport report_from_json(const std::string & text);
std::string report_markdown(const EvaluationReport & report);
/// Compact table for the terminal.
std::string summary_table(const EvaluationReport & report);

struct SliceRow
{
  ScenarioTag tag{ScenarioTag::Cruise};
  std::size_t scenes{0};
  double baseline_fde{0.0};
  double gate_fde{0.0};
  double reduction_percent{0.0};
};

struct SliceTable
{
  std::vector<SliceRow> rows;
  std::vector<std::string> notes;
};

SliceTable slice_report(const EvaluationReport & report);
std::string slice_csv(const SliceTable & table);
std::string utilization_csv(const EvaluationReport & report);

// ---------------------------------------------------------------------------
// Ablation

struct AblationArm
{
  Strategy strategy{Strategy::Ranking};
  SupervisorMode supervisor{SupervisorMode::Off};

  std::string label() const;
};

/// Every strategy plus Ranking under the rule supervisor.
std::vector<AblationArm> default_arms();

struct Estimate
{
  double mean{0.0};
  /// 1.96 sd / sqrt(n); absent for n < 2.
  std::optional<double> ci95;
};
Estimate estimate(const std::vector<double> & values);

struct AblationRow
{
  AblationArm arm;
  std::string feature_set;
  std::string preset;
  std::vector<std::uint64_t> seeds;
  std::vector<double> fde;
  std::vector<double> orr;
  std::vector<double> p95;
  std::vector<double> cost;
  std::string error;
};

struct AblationOptions
{
  TrainConfig train;
  std::vector<std::uint64_t> seeds{42, 43, 44, 45, 46};
  int folds{5};
  TriggerConfig trigger;
};

/// Cross-fitted evaluation: for every seed the samples are dealt into folds,
/// and each fold is scored by a gate trained on the others with that seed.
/// `scenes` supplies tags and map context for the rule supervisor and must
/// align with `samples`.
std::vector<AblationRow> ablate(
  const std::vector<Scene> & scenes, const std::vector<SceneSample> & samples,
  const std::vector<AblationArm> & arms, const AblationOptions & options);

std::string ablation_csv(const std::vector<AblationRow> & rows);
std::string ablation_markdown(const std::vector<AblationRow> & rows);

// ---------------------------------------------------------------------------
// Config file

struct HarnessConfig
{
  GeneratorConfig generator{GeneratorConfig::defaults()};
  TrainConfig train;
  Strategy strategy{Strategy::Ranking};
  TriggerConfig trigger;
  EndpointConfig endpoint;
  FeatureOptions features;
  std::vector<std::uint64_t> ablation_seeds{42, 43, 44, 45, 46};
  std::vector<AblationArm> ablation_arms{default_arms()};
};

/// Sections: generator, train, trigger, endpoint, features, ablation.
/// Unknown keys are rejected with DataError. `preset` picks the train
/// defaults before the file's train section applies.
HarnessConfig config_from_json(const std::string & text, std::optional<std::string> preset = {});
HarnessConfig load_config(const std::string & path, std::optional<std::string> preset = {});

}  // namespace gatekit

#endif  // GATEKIT__HARNESS_HPP_
