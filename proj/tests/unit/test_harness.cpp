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

#include <cmath>
#include <sstream>

#include "gatekit/harness.hpp"
#include "json.hpp"
#include "support.hpp"

namespace gatekit
{
namespace
{

using testing::read_file;
using testing::TempDir;
using testing::write_file;

GeneratorConfig small_benchmark(int per_family, std::uint64_t seed = 42)
{
  auto cfg = GeneratorConfig::defaults();
  cfg.seed = seed;
  for (auto & [tag, n] : cfg.counts) {
    n = per_family;
  }
  return cfg;
}

/// A gate that always returns `expert`.
GateModel fixed_gate(int expert)
{
  GateModel m;
  m.head.mlp = Mlp::zeros(kGateLayerDims);
  m.head.mlp.layers().back().bias(expert) = 1.0;
  m.head.normalizer.std.fill(1.0);
  m.head.mask = all_features_mask();
  m.preset = "appendix-a";
  return m;
}

TriggerConfig silent_trigger()
{
  TriggerConfig t;
  t.confidence_threshold = 1e-12;
  t.semantic_tags.clear();
  t.risk_accel_limit = 1e9;
  t.risk_curvature_limit = 1e9;
  return t;
}

class Harness : public ::testing::Test
{
protected:
  static void SetUpTestSuite()
  {
    scenes_ = new std::vector<Scene>(generate(small_benchmark(15)));
    pool_ = new ExpertPool(ExpertPool::standard());
    samples_ = new std::vector<SceneSample>(compute_samples(*scenes_, *pool_, 42));
    TrainConfig tc;
    tc.epochs = 20;
    ranking_ = new GateModel(train(Strategy::Ranking, training_samples(*samples_), tc));
  }
  static void TearDownTestSuite()
  {
    delete scenes_;
    delete pool_;
    delete samples_;
    delete ranking_;
  }
  static std::vector<Scene> * scenes_;
  static ExpertPool * pool_;
  static std::vector<SceneSample> * samples_;
  static GateModel * ranking_;
};
std::vector<Scene> * Harness::scenes_ = nullptr;
ExpertPool * Harness::pool_ = nullptr;
std::vector<SceneSample> * Harness::samples_ = nullptr;
GateModel * Harness::ranking_ = nullptr;

TEST(Sig9, RoundingAndFormatting)
{
  EXPECT_EQ(format_sig9(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_sig9(123456789012.0), "1.23456789e+11");
  EXPECT_EQ(round_sig9(2.0 / 3.0), 0.666666667);
  EXPECT_EQ(round_sig9(0.0), 0.0);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::exp(uniform(rng, -20, 20)) * (uniform(rng, 0, 1) < 0.5 ? -1 : 1);
    EXPECT_EQ(round_sig9(round_sig9(v)), round_sig9(v));
    EXPECT_LE(std::abs(round_sig9(v) - v), 5e-9 * std::abs(v));
  }
}

TEST(SceneFile, RoundTripIsStable)
{
  TempDir dir("scenes");
  const auto scenes = generate(small_benchmark(3));
  write_scenes((dir / "a.jsonl").string(), scenes);
  const auto back = read_scenes((dir / "a.jsonl").string());
  EXPECT_TRUE(back.rejected.empty());
  ASSERT_EQ(back.scenes.size(), scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto & a = scenes[i];
    const auto & b = back.scenes[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.tag, b.tag);
    EXPECT_EQ(a.map.intersection, b.map.intersection);
    ASSERT_EQ(a.neighbor_histories.size(), b.neighbor_histories.size());
    ASSERT_EQ(a.ground_truth_future.size(), b.ground_truth_future.size());
    for (std::size_t k = 0; k < a.ground_truth_future.size(); ++k) {
      EXPECT_NEAR(a.ground_truth_future[k].x, b.ground_truth_future[k].x,
        1e-8 * (1.0 + std::abs(a.ground_truth_future[k].x)));
    }
    EXPECT_NEAR(a.ego_history.start_time(), b.ego_history.start_time(), 1e-12);
    EXPECT_NO_THROW(validate_scene(b));
  }
  write_scenes((dir / "b.jsonl").string(), back.scenes);
  EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
}

TEST(SceneFile, BadLinesAreRejectedWithLineNumbers)
{
  TempDir dir("bad-scenes");
  const auto scenes = generate(small_benchmark(1));
  auto missing_future = nlohmann::json::parse(scene_to_json_line(scenes[1]));
  missing_future.erase("future");
  auto short_history = nlohmann::json::parse(scene_to_json_line(scenes[2]));
  short_history["ego_history"].erase(0);
  auto bad_tag = nlohmann::json::parse(scene_to_json_line(scenes[3]));
  bad_tag["tag"] = "Roundabout";
  std::ostringstream text;
  text << scene_to_json_line(scenes[0]) << "\n"
       << "\n"
       << "{not json\n"
       << missing_future.dump() << "\n"
       << short_history.dump() << "\n"
       << bad_tag.dump() << "\n"
       << scene_to_json_line(scenes[4]) << "\n";
  write_file(dir / "s.jsonl", text.str());
  const auto f = read_scenes((dir / "s.jsonl").string());
  ASSERT_EQ(f.scenes.size(), 2u);
  EXPECT_EQ(f.scenes[1].id, scenes[4].id);
  ASSERT_EQ(f.rejected.size(), 4u);
  EXPECT_EQ(f.rejected[0].line, 3u);
  EXPECT_EQ(f.rejected[1].line, 4u);
  EXPECT_NE(f.rejected[1].reason.find("future"), std::string::npos) << f.rejected[1].reason;
  EXPECT_EQ(f.rejected[2].line, 5u);
  EXPECT_EQ(f.rejected[3].line, 6u);
  EXPECT_THROW(read_scenes((dir / "missing.jsonl").string()), DataError);
}

TEST(Oracle, HandExample)
{
  const auto r = compute_oracle({{1, 2, 3}, {3, 2, 1}});
  EXPECT_EQ(r.index, (std::vector<int>{0, 2}));
  EXPECT_DOUBLE_EQ(r.fde, 1.0);
}

TEST(Oracle, SingleExpertAndTies)
{
  const auto one = compute_oracle({{4.0}, {2.0}});
  EXPECT_EQ(one.index, (std::vector<int>{0, 0}));
  EXPECT_DOUBLE_EQ(one.fde, 3.0);
  EXPECT_EQ(compute_oracle({{2, 1, 1}}).index, (std::vector<int>{1}));
}

TEST(Oracle, NeverAboveAnyColumnMean)
{
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> m(20, std::vector<double>(3));
    for (auto & row : m) {
      for (auto & v : row) {
        v = uniform(rng, 0, 10);
      }
    }
    const auto r = compute_oracle(m);
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0;
      for (const auto & row : m) {
        mean += row[c] / 20.0;
      }
      EXPECT_LE(r.fde, mean + 1e-12);
    }
  }
}

TEST(Percentile, LinearInterpolation)
{
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 0.95), 3.85);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(percentile({7}, 0.5), 7.0);
  EXPECT_THROW(percentile({}, 0.5), ContractError);
  EXPECT_THROW(percentile({1, 2}, 1.5), ContractError);
}

TEST(SupervisorMode, Names)
{
  EXPECT_EQ(parse_supervisor_mode("rule"), SupervisorMode::Rule);
  EXPECT_EQ(to_string(SupervisorMode::Llm), "llm");
  EXPECT_THROW(parse_supervisor_mode("human"), ContractError);
}

TEST_F(Harness, FeatureTablesRoundTrip)
{
  TempDir dir("tables");
  write_features_csv((dir / "f.csv").string(), *samples_);
  write_fde_csv((dir / "e.csv").string(), *samples_);
  const auto header = read_file(dir / "f.csv").substr(0, read_file(dir / "f.csv").find('\n'));
  EXPECT_EQ(std::count(header.begin(), header.end(), ',') + 1, 36);
  EXPECT_EQ(header.substr(0, header.find(',')), feature_names()[0]);
  const auto back = read_feature_tables((dir / "f.csv").string(), (dir / "e.csv").string());
  ASSERT_EQ(back.size(), samples_->size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, (*samples_)[i].id);
    EXPECT_EQ(back[i].tag, (*samples_)[i].tag);
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      EXPECT_EQ(back[i].features[k], round_sig9((*samples_)[i].features[k]));
    }
    for (std::size_t e = 0; e < 3; ++e) {
      EXPECT_EQ(back[i].fde[e], round_sig9((*samples_)[i].fde[e]));
    }
  }
}

TEST_F(Harness, FeatureTableProblemsAreDataErrors)
{
  TempDir dir("bad-tables");
  write_features_csv((dir / "f.csv").string(), *samples_);
  write_fde_csv((dir / "e.csv").string(), *samples_);
  std::vector<SceneSample> fewer(samples_->begin(), samples_->end() - 1);
  write_fde_csv((dir / "short.csv").string(), fewer);
  EXPECT_THROW(read_feature_tables((dir / "f.csv").string(), (dir / "short.csv").string()),
    DataError);
  auto text = read_file(dir / "f.csv");
  text.insert(text.find('\n') + 1, "1,2,3\n");
  write_file(dir / "narrow.csv", text);
  EXPECT_THROW(read_feature_tables((dir / "narrow.csv").string(), (dir / "e.csv").string()),
    DataError);
  auto bad_num = read_file(dir / "f.csv");
  const auto row = bad_num.find('\n') + 1;
  bad_num.replace(row, bad_num.find(',', row) - row, "abc");
  write_file(dir / "nan.csv", bad_num);
  EXPECT_THROW(read_feature_tables((dir / "nan.csv").string(), (dir / "e.csv").string()),
    DataError);
}

TEST_F(Harness, FixedGateScoresItsExpert)
{
  for (int e = 0; e < kNumExperts; ++e) {
    EvalOptions o;
    const auto r = evaluate(*scenes_, *pool_, fixed_gate(e), o);
    const auto & a = r.aggregate;
    EXPECT_NEAR(a.gate_fde, a.mean_fde[static_cast<std::size_t>(e)], 1e-9);
    for (int k = 0; k < kNumExperts; ++k) {
      EXPECT_NEAR(a.utilization[static_cast<std::size_t>(k)], k == e ? 1.0 : 0.0, 1e-12);
    }
    if (e == a.baseline_expert) {
      ASSERT_TRUE(a.orr.has_value());
      EXPECT_NEAR(*a.orr, 0.0, 1e-9);
    }
  }
}

TEST_F(Harness, RuleSupervisorWithoutTriggersChangesNothing)
{
  EvalOptions off;
  off.trigger = silent_trigger();
  EvalOptions rule = off;
  rule.supervisor = SupervisorMode::Rule;
  auto a = evaluate(*scenes_, *pool_, *ranking_, off);
  auto b = evaluate(*scenes_, *pool_, *ranking_, rule);
  EXPECT_EQ(b.aggregate.trigger_rate, 0.0);
  b.fingerprint.supervisor = a.fingerprint.supervisor;
  EXPECT_EQ(report_to_json(a), report_to_json(b));
}

TEST_F(Harness, ReportIsInternallyConsistent)
{
  EvalOptions o;
  o.supervisor = SupervisorMode::Rule;
  const auto r = evaluate(*scenes_, *pool_, *ranking_, o);
  const auto & a = r.aggregate;
  double gate = 0.0;
  for (const auto & s : r.per_scene) {
    gate += s.chosen_fde;
    EXPECT_EQ(s.chosen_fde, s.fde[static_cast<std::size_t>(s.decision.chosen)]);
    EXPECT_EQ(s.oracle, oracle_index(s.fde));
  }
  EXPECT_NEAR(a.gate_fde, gate / static_cast<double>(r.per_scene.size()), 1e-9);
  EXPECT_NEAR(a.utilization[0] + a.utilization[1] + a.utilization[2], 1.0, 1e-9);
  EXPECT_LE(a.oracle_fde, *std::min_element(a.mean_fde.begin(), a.mean_fde.end()));
  EXPECT_GE(a.gate_fde, a.oracle_fde);
  ASSERT_TRUE(a.orr.has_value());
  EXPECT_NEAR(*a.orr, orr(a.baseline_fde, a.gate_fde, a.oracle_fde).percent, 1e-9);
  EXPECT_GT(a.trigger_rate, 0.0);
  EXPECT_EQ(a.llm_override_rate, 0.0);
  EXPECT_EQ(a.rule_override_rate, a.override_rate);
  EXPECT_DOUBLE_EQ(a.cost_fraction, 1.0);

  // The same holds for the numbers as written.
  const auto j = nlohmann::json::parse(report_to_json(r));
  const auto & ja = j["aggregate"];
  const double recomputed = orr(ja["baseline_fde"].get<double>(), ja["gate_fde"].get<double>(),
      ja["oracle_fde"].get<double>()).percent;
  EXPECT_NEAR(ja["orr"].get<double>(), recomputed, 1e-6 * (1.0 + std::abs(recomputed)));
  double written = 0.0;
  for (const auto & s : j["per_scene"]) {
    written += s["chosen_fde"].get<double>();
  }
  EXPECT_NEAR(ja["gate_fde"].get<double>(), written / static_cast<double>(j["per_scene"].size()),
    1e-7 * ja["gate_fde"].get<double>());
}

TEST_F(Harness, EvaluationIsDeterministic)
{
  EvalOptions o;
  o.supervisor = SupervisorMode::Rule;
  o.workers = 3;
  const auto a = report_to_json(evaluate(*scenes_, *pool_, *ranking_, o), false);
  o.workers = 1;
  const auto b = report_to_json(evaluate(*scenes_, *pool_, *ranking_, o), false);
  EXPECT_EQ(a, b);
}

TEST_F(Harness, ReportJsonRoundTrip)
{
  EvalOptions o;
  o.supervisor = SupervisorMode::Rule;
  auto r = evaluate(*scenes_, *pool_, *ranking_, o);
  r.metadata["generated_at"] = "2026-01-01T00:00:00Z";
  const auto text = report_to_json(r);
  EXPECT_EQ(report_to_json(report_from_json(text)), text);
  EXPECT_EQ(report_to_json(r, false).find("generated_at"), std::string::npos);
  EXPECT_THROW(report_from_json("{}"), DataError);
  EXPECT_THROW(report_from_json("[1]"), DataError);
  const auto md = report_markdown(r);
  EXPECT_NE(md.find("| Method"), std::string::npos);
  EXPECT_NE(md.find("| oracle |"), std::string::npos);
  EXPECT_FALSE(summary_table(r).empty());
}

TEST_F(Harness, FailingScenesAreQuarantined)
{
  auto scenes = std::vector<Scene>(scenes_->begin(), scenes_->begin() + 20);
  scenes[4].ground_truth_future = scenes[4].ground_truth_future.prefix(50);
  EvalOptions o;
  const auto r = evaluate(scenes, *pool_, *ranking_, o);
  EXPECT_EQ(r.per_scene.size(), 19u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].line, 5u);
  EXPECT_NE(r.failures[0].reason.find(scenes[4].id), std::string::npos);
  scenes[7].ground_truth_future = scenes[7].ground_truth_future.prefix(50);
  scenes[9].ego_history = scenes[9].ego_history.prefix(10);
  EXPECT_THROW(evaluate(scenes, *pool_, *ranking_, o), DataError);
}

TEST_F(Harness, TwoStageCostsLessThanTheFullPool)
{
  TrainConfig tc;
  tc.epochs = 10;
  auto m = train(Strategy::TwoStage, training_samples(*samples_), tc);
  EvalOptions o;
  const auto r = evaluate(*scenes_, *pool_, m, o);
  const auto & a = r.aggregate;
  EXPECT_LT(a.expensive_invocation_rate, 1.0);
  EXPECT_NEAR(a.cost_fraction, (4.0 + 10.0 * a.expensive_invocation_rate) / 14.0, 1e-9);
  for (const auto & s : r.per_scene) {
    EXPECT_EQ(s.cost_spent, s.expensive_invoked ? 14.0 : 4.0);
  }
}

EvaluationReport slice_fixture()
{
  // Expert 0 is the best single expert overall; the gate picks expert 1.
  struct Row
  {
    ScenarioTag tag;
    double base;
    double gate;
  };
  const std::vector<Row> rows{{ScenarioTag::LeftTurn, 21.51, 8.52},
    {ScenarioTag::CutIn, 18.89, 10.41}, {ScenarioTag::HighSpeed, 19.55, 1.04},
    {ScenarioTag::Occlusion, 24.23, 11.39}, {ScenarioTag::Cruise, 3.0, 3.0}};
  EvaluationReport r;
  int n = 0;
  for (const auto & row : rows) {
    SceneResult s;
    s.id = "fixture-" + std::to_string(n++);
    s.tag = row.tag;
    s.fde = {row.base, row.gate, 500.0};
    s.ade = s.fde;
    s.oracle = oracle_index(s.fde);
    s.decision.chosen = 1;
    s.chosen_fde = row.gate;
    s.chosen_ade = row.gate;
    r.per_scene.push_back(s);
  }
  // Keep expert 0 the overall baseline.
  r.per_scene[4].fde[1] = 1000.0;
  r.per_scene[4].decision.chosen = 0;
  aggregate_report(r, ExpertPool::standard());
  return r;
}

TEST(SliceReport, ReductionArithmetic)
{
  const auto r = slice_fixture();
  ASSERT_EQ(r.aggregate.baseline_expert, 0);
  const auto table = slice_report(r);
  std::map<ScenarioTag, double> got;
  for (const auto & row : table.rows) {
    got[row.tag] = row.reduction_percent;
  }
  EXPECT_NEAR(got.at(ScenarioTag::LeftTurn), 60.4, 0.1);
  EXPECT_NEAR(got.at(ScenarioTag::CutIn), 44.9, 0.1);
  EXPECT_NEAR(got.at(ScenarioTag::HighSpeed), 94.7, 0.1);
  EXPECT_NEAR(got.at(ScenarioTag::Occlusion), 53.0, 0.1);
  EXPECT_NEAR(got.at(ScenarioTag::Cruise), 0.0, 1e-12);
  ASSERT_EQ(table.notes.size(), 1u);
  EXPECT_NE(table.notes[0].find("Curve"), std::string::npos);
  const auto csv = slice_csv(table);
  EXPECT_NE(csv.find("LeftTurn"), std::string::npos);
  EXPECT_EQ(csv.find("Curve"), std::string::npos);
}

TEST(SliceReport, InvariantUnderUniformScaling)
{
  auto r = slice_fixture();
  const auto before = slice_report(r);
  for (auto & s : r.per_scene) {
    for (auto & f : s.fde) {
      f *= 3.7;
    }
    s.chosen_fde *= 3.7;
  }
  aggregate_report(r, ExpertPool::standard());
  const auto after = slice_report(r);
  ASSERT_EQ(before.rows.size(), after.rows.size());
  for (std::size_t i = 0; i < before.rows.size(); ++i) {
    EXPECT_NEAR(before.rows[i].reduction_percent, after.rows[i].reduction_percent, 1e-9);
  }
}

TEST(SliceReport, UtilizationCsv)
{
  const auto csv = utilization_csv(slice_fixture());
  EXPECT_NE(csv.find("physics"), std::string::npos);
  EXPECT_NE(csv.find("interactive"), std::string::npos);
}

TEST(Estimate, ConfidenceInterval)
{
  EXPECT_FALSE(estimate({3.0}).ci95.has_value());
  const auto e = estimate({1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(e.mean, 3.0);
  ASSERT_TRUE(e.ci95.has_value());
  EXPECT_NEAR(*e.ci95, 1.96 * std::sqrt(2.5) / std::sqrt(5.0), 1e-12);
}

TEST(Arms, LabelsAndDefaults)
{
  EXPECT_EQ((AblationArm{Strategy::Ranking, SupervisorMode::Rule}.label()), "ranking+rule");
  const auto arms = default_arms();
  EXPECT_EQ(arms.size(), kAllStrategies.size() + 1);
}

TEST_F(Harness, AblationSingleSeedHasNoInterval)
{
  AblationOptions o;
  o.train.epochs = 5;
  o.seeds = {42};
  const auto rows = ablate(*scenes_, *samples_,
      {{Strategy::Ranking, SupervisorMode::Off}, {Strategy::RegressionFde, SupervisorMode::Off}}, o);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].fde.size(), 1u);
  EXPECT_EQ(rows[0].preset, "appendix-a");
  EXPECT_FALSE(estimate(rows[0].orr).ci95.has_value());
  EXPECT_TRUE(rows[0].error.empty());
  const auto csv = ablation_csv(rows);
  EXPECT_NE(csv.find("ranking"), std::string::npos);
}

TEST_F(Harness, AblationFiveSeedsHaveIntervals)
{
  AblationOptions o;
  o.train.epochs = 3;
  const auto rows = ablate(*scenes_, *samples_,
      {{Strategy::Ranking, SupervisorMode::Off}, {Strategy::Ranking, SupervisorMode::Rule},
        {Strategy::TwoStage, SupervisorMode::Off}}, o);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto & row : rows) {
    EXPECT_EQ(row.seeds.size(), 5u);
    EXPECT_TRUE(estimate(row.orr).ci95.has_value());
    EXPECT_TRUE(estimate(row.p95).ci95.has_value());
  }
  EXPECT_EQ(estimate(rows[0].cost).mean, 1.0);
  EXPECT_LT(estimate(rows[2].cost).mean, 1.0);
  const auto md = ablation_markdown(rows);
  EXPECT_NE(md.find("ranking+rule"), std::string::npos);
  EXPECT_NE(md.find("±"), std::string::npos);
}

TEST_F(Harness, AblationRowErrorsDoNotAbortOtherRows)
{
  auto samples = *samples_;
  for (auto & s : samples) {
    s.fde = {1.0, 2.0, 3.0};  // one oracle class; classification cannot train
  }
  AblationOptions o;
  o.train.epochs = 2;
  o.seeds = {42};
  const auto rows = ablate(*scenes_, samples,
      {{Strategy::ClassificationMeta, SupervisorMode::Off},
        {Strategy::Ranking, SupervisorMode::Off}}, o);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_TRUE(rows[1].error.empty());
  EXPECT_EQ(rows[1].fde.size(), 1u);
}

TEST(Config, SectionsApply)
{
  const auto c = config_from_json(R"({
    "generator": {"seed": 7, "counts": {"Cruise": 3, "cut_in": 2}},
    "train": {"strategy": "risk_q90", "epochs": 12},
    "trigger": {"confidence_threshold": 0.3, "semantic_tags": ["LeftTurn"]},
    "endpoint": {"base_url": "http://127.0.0.1:1/v1", "max_in_flight": 2},
    "features": {"accel_limit": 5.0},
    "ablation": {"seeds": [1, 2], "arms": ["ranking", "ranking+rule"]}
  })");
  EXPECT_EQ(c.generator.seed, 7u);
  EXPECT_EQ(c.generator.total_count(), 5);
  EXPECT_EQ(c.strategy, Strategy::RiskQ90);
  EXPECT_EQ(c.train.epochs, 12);
  EXPECT_EQ(c.train.batch_size, 64);
  EXPECT_EQ(c.trigger.confidence_threshold, 0.3);
  EXPECT_EQ(c.trigger.semantic_tags, std::set<ScenarioTag>{ScenarioTag::LeftTurn});
  EXPECT_EQ(c.endpoint.max_in_flight, 2);
  EXPECT_EQ(c.features.accel_limit, 5.0);
  EXPECT_EQ(c.ablation_seeds, (std::vector<std::uint64_t>{1, 2}));
  ASSERT_EQ(c.ablation_arms.size(), 2u);
  EXPECT_EQ(c.ablation_arms[1].supervisor, SupervisorMode::Rule);
}

TEST(Config, PresetPrecedence)
{
  EXPECT_EQ(config_from_json("{}").train.preset, "appendix-a");
  EXPECT_EQ(config_from_json(R"({"train": {"preset": "main-text"}})").train.epochs, 30);
  EXPECT_EQ(config_from_json(R"({"train": {"preset": "main-text"}})", "appendix-a").train.epochs,
    50);
  EXPECT_EQ(config_from_json(R"({"train": {"epochs": 9}})", "main-text").train.epochs, 9);
}

TEST(Config, RejectsUnknownKeysAndBadValues)
{
  EXPECT_THROW(config_from_json(R"({"trainer": {}})"), DataError);
  EXPECT_THROW(config_from_json(R"({"train": {"epoch": 3}})"), DataError);
  EXPECT_THROW(config_from_json(R"({"train": {"epochs": "many"}})"), DataError);
  EXPECT_THROW(config_from_json(R"({"train": {"epochs": 0}})"), DataError);
  EXPECT_THROW(config_from_json(R"({"generator": {"counts": {"Parking": 3}}})"), DataError);
  EXPECT_THROW(config_from_json("{"), DataError);
  EXPECT_THROW(load_config("/nonexistent/gatekit.json"), DataError);
}

}  // namespace
}  // namespace gatekit
