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

#ifndef GATEKIT__GATES_HPP_
#define GATEKIT__GATES_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gatekit/core.hpp"
#include "gatekit/experts.hpp"
#include "gatekit/meta_features.hpp"
#include "gatekit/mlp.hpp"

namespace gatekit
{

enum class Strategy
{
  Thresholding,
  ClassificationGeo,
  ClassificationMeta,
  RegressionFde,
  QuantileQ75,
  RiskQ90,
  Ranking,
  TwoStage,
};

inline constexpr std::array<Strategy, 8> kAllStrategies = {
  Strategy::Thresholding, Strategy::ClassificationGeo, Strategy::ClassificationMeta,
  Strategy::RegressionFde, Strategy::QuantileQ75, Strategy::RiskQ90, Strategy::Ranking,
  Strategy::TwoStage};

/// "ranking", "classification-meta", "risk-q90", ...
std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);
/// Human label for the feature set a strategy consumes.
std::string_view feature_set_name(Strategy s);

using ExpertScores = std::array<double, kNumExperts>;

struct TrainConfig
{
  int epochs{50};
  int batch_size{64};
  double learning_rate{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
  double tie_epsilon{0.01};  // m
  std::uint64_t seed{42};
  /// Internal folds whose pooled validation ORR picks the epoch count.
  int validation_folds{5};
  double confidence_threshold{0.4};
  std::string preset{"appendix-a"};

  /// 50 epochs, batch 64, lr 1e-3.
  static TrainConfig appendix_a();
  /// 30 epochs, batch 128, lr 5e-4.
  static TrainConfig main_text();
  static TrainConfig from_preset(std::string_view name);
  void validate() const;
};

struct TrainingSample
{
  MetaFeatureVector features;  // raw, unnormalized
  ExpertScores fde{};
};

/// One scorer: normalizer, mask, and the 36 -> 64 -> 32 -> 3 network.
struct GateHead
{
  Mlp mlp;
  NormalizationStats normalizer;
  FeatureMask mask{};

  friend bool operator==(const GateHead &, const GateHead &) = default;
};

struct TrainingLog
{
  /// Final refit, one entry per epoch up to and including best_epoch.
  std::vector<double> train_loss;
  /// Pooled over the internal validation folds, one entry per configured epoch.
  std::vector<double> val_fde;
  std::vector<double> val_orr;
  std::vector<double> val_accuracy;
  int best_epoch{-1};

  friend bool operator==(const TrainingLog &, const TrainingLog &) = default;
};

struct GateModel
{
  Strategy strategy{Strategy::Ranking};
  GateHead head;
  /// TwoStage only: scorer trained without the interactive expert's slots.
  std::optional<GateHead> stage_one;
  double confidence_threshold{0.4};
  std::uint64_t seed{42};
  int epochs{0};
  std::string preset;
  TrainingLog log;

  /// Throws ContractError on shape or mask problems.
  void validate() const;

  friend bool operator==(const GateModel &, const GateModel &) = default;
};

enum class OverrideSource
{
  None,
  Rule,
  Llm,
};
std::string_view to_string(OverrideSource s);

struct GateDecision
{
  int chosen{0};
  ExpertScores scores{};
  double confidence{1.0 / 3.0};
  bool overridden{false};
  OverrideSource override_source{OverrideSource::None};
};

inline const std::vector<int> kGateLayerDims = {static_cast<int>(kFeatureDim), 64, 32, kNumExperts};

/// Lowest-index argmin.
int oracle_index(const ExpertScores & fde);
/// Lowest-index argmax.
int argmax(const ExpertScores & scores);
ExpertScores softmax(const ExpertScores & scores);
/// chosen = argmax, confidence = max softmax probability.
GateDecision decision_from_scores(const ExpertScores & scores);

/// Normalizes and masks a raw feature vector for a head.
Eigen::VectorXd prepare_input(const GateHead & head, const MetaFeatureVector & raw);
/// Raw network outputs; regression-type strategies return predicted errors here.
ExpertScores head_outputs(const GateHead & head, const MetaFeatureVector & raw);
/// Uniform scores (higher is better): regression-type outputs are negated.
ExpertScores forward(const GateModel & model, const MetaFeatureVector & raw);

struct RankingLoss
{
  double loss{0.0};
  double d_si{0.0};
  double d_sj{0.0};
};
RankingLoss ranking_loss(double s_i, double s_j, bool i_better);

struct RankingPair
{
  int i{0};
  int j{0};
  bool i_better{false};

  friend bool operator==(const RankingPair &, const RankingPair &) = default;
};
/// Pairs (0,1), (0,2), (1,2) minus near-ties.
std::vector<RankingPair> build_pairs(const ExpertScores & fde, double tie_epsilon);

GateModel train(Strategy strategy, const std::vector<TrainingSample> & data, const TrainConfig & config);

GateDecision decide(const GateModel & model, const MetaFeatureVector & raw);

/// Hand rule on geometric slots; never learns.
GateDecision threshold_gate(const Scene & scene, const MetaFeatureVector & features);

struct StageOneResult
{
  bool commit{false};
  GateDecision decision;  // valid when commit
};
/// Stage 1 of the compute-aware gate on a vector whose interactive slots may be absent.
StageOneResult stage_one_decide(const GateModel & model, const MetaFeatureVector & raw);

struct TwoStageOutcome
{
  GateDecision decision;
  double cost_spent{0.0};
  bool escalated{false};
  SceneAnalysis analysis;
};
/// Runs the cheap experts, escalates to the expensive one only under low
/// stage-1 confidence. A threshold of 1 or more always escalates.
TwoStageOutcome two_stage_decide(
  const GateModel & model, const Scene & scene, const ExpertPool & pool, std::uint64_t seed,
  const FeatureOptions & options = {});

std::string checkpoint_to_json(const GateModel & model);
GateModel checkpoint_from_json(const std::string & text);
void save_checkpoint(const GateModel & model, const std::string & path);
GateModel load_checkpoint(const std::string & path);

}  // namespace gatekit

#endif  // GATEKIT__GATES_HPP_
