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

#include "gatekit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace gatekit
{

namespace
{

using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ordered_json num(double v)
{
  return std::isfinite(v) ? ordered_json(round_sig9(v)) : ordered_json(nullptr);
}

template<typename Array>
ordered_json num_array(const Array & values)
{
  ordered_json a = ordered_json::array();
  for (double v : values) {
    a.push_back(num(v));
  }
  return a;
}

double get_num(const json & j)
{
  return j.is_null() ? kNaN : j.get<double>();
}

ExpertScores get_scores(const json & j)
{
  if (!j.is_array() || j.size() != static_cast<std::size_t>(kNumExperts)) {
    throw DataError("expected an array of " + std::to_string(kNumExperts) + " numbers");
  }
  ExpertScores s{};
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = get_num(j[k]);
  }
  return s;
}

std::string read_file(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path);
  }
  out << text;
}

/// Runs body(i) for i in [0, n) on up to `workers` threads.
template<typename Body>
void parallel_for(std::size_t n, int workers, Body body)
{
  std::size_t threads = workers > 0 ? static_cast<std::size_t>(workers) :
    std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
        for (std::size_t i = next++; i < n; i = next++) {
          body(i);
        }
      });
  }
  for (auto & t : pool) {
    t.join();
  }
}

ordered_json states_to_json(const Trajectory & t)
{
  ordered_json a = ordered_json::array();
  for (const auto & s : t) {
    a.push_back({num(s.x), num(s.y), num(s.vx), num(s.vy), num(s.heading)});
  }
  return a;
}

std::vector<AgentState> states_from_json(const json & j, const std::string & what)
{
  if (!j.is_array()) {
    throw DataError("'" + what + "' is not an array");
  }
  std::vector<AgentState> out;
  out.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto & row = j[k];
    if (!row.is_array() || row.size() != 5) {
      throw DataError("'" + what + "' state " + std::to_string(k) +
        " is not [x, y, vx, vy, heading]");
    }
    for (const auto & v : row) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) {
        throw DataError("'" + what + "' state " + std::to_string(k) + " has a non-finite value");
      }
    }
    out.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>(),
        row[3].get<double>(), row[4].get<double>()});
  }
  return out;
}

const json & field(const json & j, const char * key)
{
  if (!j.contains(key)) {
    throw DataError(std::string("missing field '") + key + "'");
  }
  return j[key];
}

std::vector<std::string> split_csv_line(const std::string & line)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double parse_number(const std::string & text, const std::string & where)
{
  const char * begin = text.c_str();
  char * end = nullptr;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || !std::isfinite(v)) {
    throw DataError(where + ": '" + text + "' is not a finite number");
  }
  return v;
}

std::vector<std::string> read_lines(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot read " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(line);
  }
  return lines;
}

double total_cost(const ExpertPool & pool)
{
  double c = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    c += pool[i].id().cost_weight;
  }
  return c;
}

}  // namespace

double round_sig9(double v)
{
  if (!std::isfinite(v) || v == 0.0) {
    return v;
  }
  return std::strtod(format_sig9(v).c_str(), nullptr);
}

std::string format_sig9(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Scene files

std::string scene_to_json_line(const Scene & scene)
{
  ordered_json j;
  j["id"] = scene.id;
  j["tag"] = std::string(to_string(scene.tag));
  j["rate_hz"] = num(scene.ego_history.rate_hz());
  j["ego_history"] = states_to_json(scene.ego_history);
  ordered_json neighbors = ordered_json::array();
  for (const auto & n : scene.neighbor_histories) {
    neighbors.push_back(states_to_json(n));
  }
  j["neighbors"] = neighbors;
  j["future"] = states_to_json(scene.ground_truth_future);
  j["map"] = {{"lane_curvature", num(scene.map.lane_curvature)},
    {"intersection", scene.map.intersection}};
  return j.dump();
}

Scene scene_from_json_line(const std::string & line, const Horizons & horizons)
{
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    throw DataError("invalid JSON");
  }
  if (!j.is_object()) {
    throw DataError("a scene record must be a JSON object");
  }
  try {
    Scene s;
    s.id = field(j, "id").get<std::string>();
    if (s.id.empty()) {
      throw DataError("empty scene id");
    }
    const auto tag = parse_scenario_tag(field(j, "tag").get<std::string>());
    if (!tag) {
      throw DataError("unknown tag '" + j["tag"].get<std::string>() + "'");
    }
    s.tag = *tag;
    const double rate = field(j, "rate_hz").get<double>();
    if (!(rate > 0.0)) {
      throw DataError("rate_hz must be positive");
    }
    auto history = states_from_json(field(j, "ego_history"), "ego_history");
    const double t0 = -static_cast<double>(history.empty() ? 0 : history.size() - 1) / rate;
    s.ego_history = Trajectory(std::move(history), rate, t0);
    const auto & neighbors = field(j, "neighbors");
    if (!neighbors.is_array()) {
      throw DataError("'neighbors' is not an array");
    }
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      auto n = states_from_json(neighbors[i], "neighbors[" + std::to_string(i) + "]");
      const double n0 = -static_cast<double>(n.empty() ? 0 : n.size() - 1) / rate;
      s.neighbor_histories.emplace_back(std::move(n), rate, n0);
    }
    s.ground_truth_future = Trajectory(states_from_json(field(j, "future"), "future"), rate,
        1.0 / rate);
    const auto & map = field(j, "map");
    s.map.lane_curvature = field(map, "lane_curvature").get<double>();
    s.map.intersection = field(map, "intersection").get<bool>();
    validate_scene(s, horizons);
    return s;
  } catch (const json::exception & e) {
    throw DataError(std::string("wrong field type (") + e.what() + ")");
  }
}

void write_scenes(const std::string & path, const std::vector<Scene> & scenes)
{
  std::string text;
  for (const auto & s : scenes) {
    text += scene_to_json_line(s);
    text += '\n';
  }
  write_file(path, text);
}

SceneFile read_scenes(const std::string & path, const Horizons & horizons)
{
  SceneFile out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    try {
      out.scenes.push_back(scene_from_json_line(lines[i], horizons));
    } catch (const DataError & e) {
      out.rejected.push_back({i + 1, e.what()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Samples and tables

std::vector<SceneSample> compute_samples(
  const std::vector<Scene> & scenes, const ExpertPool & pool, std::uint64_t seed,
  const FeatureOptions & options, std::vector<LineError> * failures)
{
  std::vector<std::optional<SceneSample>> slots(scenes.size());
  std::vector<std::string> errors(scenes.size());
  parallel_for(scenes.size(), 0, [&](std::size_t i) {
      try {
        const Scene & scene = scenes[i];
        validate_scene(scene, options.horizons);
        const auto a = analyze_scene(scene, pool, seed, options);
        if (!a.features.all_finite()) {
          throw DataError("non-finite meta-features");
        }
        SceneSample s;
        s.id = scene.id;
        s.tag = scene.tag;
        s.features = a.features;
        for (std::size_t e = 0; e < s.fde.size(); ++e) {
          s.fde[e] = fde(*a.predictions[e], scene.ground_truth_future);
          s.ade[e] = ade(*a.predictions[e], scene.ground_truth_future);
        }
        slots[i] = std::move(s);
      } catch (const std::exception & e) {
        errors[i] = e.what();
      }
    });
  std::vector<SceneSample> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else if (failures != nullptr) {
      failures->push_back({i + 1, scenes[i].id + ": " + errors[i]});
    }
  }
  return out;
}

std::vector<TrainingSample> training_samples(const std::vector<SceneSample> & samples)
{
  std::vector<TrainingSample> out;
  out.reserve(samples.size());
  for (const auto & s : samples) {
    out.push_back({s.features, s.fde});
  }
  return out;
}

void write_features_csv(const std::string & path, const std::vector<SceneSample> & samples)
{
  std::string text;
  const auto & names = feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    text += (i ? "," : "") + names[i];
  }
  text += '\n';
  for (const auto & s : samples) {
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
      text += (i ? "," : "") + format_sig9(s.features[i]);
    }
    text += '\n';
  }
  write_file(path, text);
}

void write_fde_csv(const std::string & path, const std::vector<SceneSample> & samples)
{
  std::string text = "scene_id,tag,physics_fde,interactive_fde,curvature_fde\n";
  for (const auto & s : samples) {
    text += s.id + "," + std::string(to_string(s.tag));
    for (double v : s.fde) {
      text += "," + format_sig9(v);
    }
    text += '\n';
  }
  write_file(path, text);
}

std::vector<SceneSample> read_feature_tables(
  const std::string & features_path, const std::string & fde_path)
{
  auto features = read_lines(features_path);
  auto fdes = read_lines(fde_path);
  const auto drop_blank = [](std::vector<std::string> & v) {
      v.erase(std::remove_if(v.begin(), v.end(), [](const std::string & l) {return l.empty();}),
        v.end());
    };
  drop_blank(features);
  drop_blank(fdes);
  if (features.empty() || fdes.empty()) {
    throw DataError("feature or FDE table is empty");
  }
  const auto & names = feature_names();
  const auto header = split_csv_line(features[0]);
  if (!std::equal(header.begin(), header.end(), names.begin(), names.end())) {
    throw DataError(features_path + ": header does not match the 36 feature slots");
  }
  if (split_csv_line(fdes[0]) != std::vector<std::string>{"scene_id", "tag", "physics_fde",
      "interactive_fde", "curvature_fde"})
  {
    throw DataError(fde_path + ": unexpected header");
  }
  if (features.size() != fdes.size()) {
    throw DataError("feature table has " + std::to_string(features.size() - 1) +
      " rows but the FDE table has " + std::to_string(fdes.size() - 1));
  }
  std::vector<SceneSample> out;
  for (std::size_t r = 1; r < features.size(); ++r) {
    const std::string where_f = features_path + " line " + std::to_string(r + 1);
    const std::string where_e = fde_path + " line " + std::to_string(r + 1);
    const auto cells = split_csv_line(features[r]);
    if (cells.size() != kFeatureDim) {
      throw DataError(where_f + ": expected " + std::to_string(kFeatureDim) + " columns, got " +
        std::to_string(cells.size()));
    }
    const auto row = split_csv_line(fdes[r]);
    if (row.size() != 2 + static_cast<std::size_t>(kNumExperts)) {
      throw DataError(where_e + ": expected 5 columns");
    }
    SceneSample s;
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
      s.features[i] = parse_number(cells[i], where_f);
    }
    s.id = row[0];
    const auto tag = parse_scenario_tag(row[1]);
    if (!tag) {
      throw DataError(where_e + ": unknown tag '" + row[1] + "'");
    }
    s.tag = *tag;
    for (std::size_t e = 0; e < s.fde.size(); ++e) {
      s.fde[e] = parse_number(row[2 + e], where_e);
      s.ade[e] = kNaN;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracle

OracleResult compute_oracle(const std::vector<std::vector<double>> & fde)
{
  if (fde.empty()) {
    throw ContractError("oracle needs at least one scene");
  }
  OracleResult r;
  for (const auto & row : fde) {
    if (row.empty()) {
      throw ContractError("oracle needs at least one expert per scene");
    }
    const auto best = std::min_element(row.begin(), row.end());
    r.index.push_back(static_cast<int>(best - row.begin()));
    r.fde += *best;
  }
  r.fde /= static_cast<double>(fde.size());
  return r;
}

OracleResult compute_oracle(const std::vector<Scene> & scenes, const ExpertPool & pool)
{
  std::vector<std::vector<double>> table;
  Horizons hz;
  for (const auto & scene : scenes) {
    std::vector<double> row;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const auto pred = clamp_horizon(pool[k].predict(scene).trajectory, hz);
      row.push_back(fde(pred, scene.ground_truth_future));
    }
    table.push_back(std::move(row));
  }
  return compute_oracle(table);
}

double percentile(std::vector<double> values, double q)
{
  if (values.empty()) {
    throw ContractError("percentile of an empty set");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw ContractError("percentile level must lie in [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// Evaluation

std::string_view to_string(SupervisorMode mode)
{
  switch (mode) {
    case SupervisorMode::Off: return "off";
    case SupervisorMode::Rule: return "rule";
    case SupervisorMode::Llm: return "llm";
  }
  return "off";
}

SupervisorMode parse_supervisor_mode(std::string_view text)
{
  for (auto m : {SupervisorMode::Off, SupervisorMode::Rule, SupervisorMode::Llm}) {
    if (to_string(m) == text) {
      return m;
    }
  }
  throw ContractError("unknown supervisor mode '" + std::string(text) + "' (off, rule, llm)");
}

namespace
{

struct Pending
{
  SceneResult result;
  MetaFeatureVector features;
  SupervisorVerdict rule;
  std::string synopsis;
};

/// Violation slots of the chosen expert re-measured at the trigger's limits.
MetaFeatureVector trigger_view(
  const MetaFeatureVector & features, const SceneAnalysis & analysis, int chosen,
  const TriggerConfig & trigger, const FeatureOptions & options)
{
  if (trigger.risk_accel_limit == options.accel_limit &&
    trigger.risk_curvature_limit == options.curvature_limit)
  {
    return features;
  }
  MetaFeatureVector v = features;
  const auto & pred = analysis.predictions[static_cast<std::size_t>(chosen)];
  if (pred) {
    const auto rates = physics_violation(*pred, trigger.risk_accel_limit,
        trigger.risk_curvature_limit);
    v[slot_index(chosen, DiagSlot::AccelViolationRate)] = rates.accel_rate;
    v[slot_index(chosen, DiagSlot::CurvatureViolationRate)] = rates.curvature_rate;
  }
  return v;
}

AggregateBlock aggregate_block(
  const std::vector<const SceneResult *> & rows, int baseline_expert, double cost_total)
{
  AggregateBlock b;
  b.scenes = rows.size();
  b.baseline_expert = baseline_expert;
  if (rows.empty()) {
    return b;
  }
  const double n = static_cast<double>(rows.size());
  std::vector<double> chosen;
  double triggered = 0, answered = 0, overridden = 0, by_rule = 0, by_llm = 0, hits = 0;
  double cost = 0, expensive = 0;
  for (const auto * r : rows) {
    for (std::size_t k = 0; k < b.mean_fde.size(); ++k) {
      b.mean_fde[k] += r->fde[k] / n;
      b.mean_ade[k] += r->ade[k] / n;
    }
    b.oracle_fde += r->fde[static_cast<std::size_t>(r->oracle)] / n;
    b.gate_fde += r->chosen_fde / n;
    b.gate_ade += r->chosen_ade / n;
    chosen.push_back(r->chosen_fde);
    b.utilization[static_cast<std::size_t>(r->decision.chosen)] += 1.0 / n;
    hits += r->decision.chosen == r->oracle;
    triggered += r->triggered;
    answered += r->llm_answered;
    overridden += r->decision.overridden;
    by_rule += r->decision.override_source == OverrideSource::Rule;
    by_llm += r->decision.override_source == OverrideSource::Llm;
    cost += r->cost_spent;
    expensive += r->expensive_invoked;
  }
  b.baseline_fde = b.mean_fde[static_cast<std::size_t>(baseline_expert)];
  if (b.baseline_fde > b.oracle_fde + 1e-12) {
    b.orr = orr(b.baseline_fde, b.gate_fde, b.oracle_fde).percent;
  }
  b.p95_fde = percentile(chosen, 0.95);
  b.selection_accuracy = hits / n;
  b.trigger_rate = triggered / n;
  b.llm_answer_rate = answered / n;
  b.override_rate = overridden / n;
  b.rule_override_rate = by_rule / n;
  b.llm_override_rate = by_llm / n;
  b.cost_fraction = cost / (n * cost_total);
  b.expensive_invocation_rate = expensive / n;
  return b;
}

}  // namespace

void aggregate_report(EvaluationReport & report, const ExpertPool & pool)
{
  if (report.per_scene.empty()) {
    throw DataError("report has no scored scenes");
  }
  std::vector<const SceneResult *> all;
  for (const auto & r : report.per_scene) {
    all.push_back(&r);
  }
  const double cost_total = total_cost(pool);
  ExpertScores means{};
  for (const auto * r : all) {
    for (std::size_t k = 0; k < means.size(); ++k) {
      means[k] += r->fde[k];
    }
  }
  const int baseline = oracle_index(means);
  report.aggregate = aggregate_block(all, baseline, cost_total);
  report.slices.clear();
  for (auto tag : kAllScenarioTags) {
    std::vector<const SceneResult *> rows;
    for (const auto * r : all) {
      if (r->tag == tag) {
        rows.push_back(r);
      }
    }
    if (!rows.empty()) {
      report.slices[tag] = aggregate_block(rows, baseline, cost_total);
    }
  }
}

EvaluationReport evaluate(
  const std::vector<Scene> & scenes, const ExpertPool & pool, const GateModel & model,
  const EvalOptions & options)
{
  if (scenes.empty()) {
    throw DataError("no scenes to evaluate");
  }
  options.trigger.validate();
  if (options.supervisor == SupervisorMode::Llm) {
    options.endpoint.validate();
  }
  model.validate();
  const bool two_stage = model.strategy == Strategy::TwoStage;
  const double cost_total = total_cost(pool);

  std::vector<std::optional<Pending>> pending(scenes.size());
  std::vector<std::string> errors(scenes.size());
  parallel_for(scenes.size(), options.workers, [&](std::size_t i) {
      try {
        const Scene & scene = scenes[i];
        validate_scene(scene, options.features.horizons);
        Pending p;
        SceneAnalysis analysis;
        if (two_stage) {
          auto out = two_stage_decide(model, scene, pool, options.seed, options.features);
          p.result.decision = out.decision;
          p.result.cost_spent = out.cost_spent;
          p.result.expensive_invoked = out.escalated;
          analysis = std::move(out.analysis);
        } else {
          analysis = analyze_scene(scene, pool, options.seed, options.features);
          p.result.decision = decide(model, analysis.features);
          p.result.cost_spent = cost_total;
        }
        if (!analysis.features.all_finite()) {
          throw DataError("non-finite meta-features");
        }
        // Scoring sees every expert; cost_spent counts only what the gate ran.
        for (std::size_t k = 0; k < pool.size(); ++k) {
          const auto & pred = analysis.predictions[k] ? *analysis.predictions[k] :
            clamp_horizon(pool[k].predict(scene).trajectory, options.features.horizons);
          p.result.fde[k] = fde(pred, scene.ground_truth_future);
          p.result.ade[k] = ade(pred, scene.ground_truth_future);
        }
        p.result.id = scene.id;
        p.result.tag = scene.tag;
        p.result.oracle = oracle_index(p.result.fde);
        p.features = analysis.features;
        if (options.supervisor != SupervisorMode::Off) {
          const auto view = trigger_view(analysis.features, analysis, p.result.decision.chosen,
              options.trigger, options.features);
          p.result.triggered = should_trigger(p.result.decision, scene, view, options.trigger);
          if (p.result.triggered) {
            p.rule = rule_policy(scene, view, p.result.decision);
            if (options.supervisor == SupervisorMode::Llm) {
              p.synopsis = synopsis(scene, view, p.result.decision);
            }
          }
        }
        pending[i] = std::move(p);
      } catch (const std::exception & e) {
        errors[i] = e.what();
      }
    });

  EvaluationReport report;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (!pending[i]) {
      report.failures.push_back({i + 1, scenes[i].id + ": " + errors[i]});
    }
  }
  if (static_cast<double>(report.failures.size()) >
    options.max_failure_fraction * static_cast<double>(scenes.size()))
  {
    throw DataError(std::to_string(report.failures.size()) + " of " +
      std::to_string(scenes.size()) + " scenes failed (first: " + report.failures.front().reason +
      ")");
  }

  std::vector<SupervisorVerdict> llm;
  std::vector<std::size_t> llm_owner(scenes.size(), std::numeric_limits<std::size_t>::max());
  if (options.supervisor == SupervisorMode::Llm) {
    std::vector<LlmJob> jobs;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (pending[i] && pending[i]->result.triggered) {
        llm_owner[i] = jobs.size();
        jobs.push_back({pending[i]->result.id, pending[i]->synopsis, pending[i]->rule});
      }
    }
    llm = llm_batch(jobs, options.endpoint, options.audit);
  }

  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (!pending[i]) {
      continue;
    }
    auto & r = pending[i]->result;
    if (r.triggered) {
      if (options.supervisor == SupervisorMode::Llm) {
        const auto & v = llm[llm_owner[i]];
        r.llm_answered = v.rationale.rfind("fallback:", 0) != 0;
        r.decision = apply_override(r.decision, v,
            r.llm_answered ? OverrideSource::Llm : OverrideSource::Rule);
      } else {
        r.decision = apply_override(r.decision, pending[i]->rule, OverrideSource::Rule);
      }
    }
    r.chosen_fde = r.fde[static_cast<std::size_t>(r.decision.chosen)];
    r.chosen_ade = r.ade[static_cast<std::size_t>(r.decision.chosen)];
    report.per_scene.push_back(std::move(r));
  }

  aggregate_report(report, pool);
  report.fingerprint.strategy = std::string(to_string(model.strategy));
  report.fingerprint.preset = model.preset;
  report.fingerprint.train_seed = model.seed;
  report.fingerprint.eval_seed = options.seed;
  report.fingerprint.supervisor = std::string(to_string(options.supervisor));
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization

namespace
{

ordered_json block_to_json(const AggregateBlock & b)
{
  ordered_json j;
  j["scenes"] = b.scenes;
  j["mean_fde"] = num_array(b.mean_fde);
  j["mean_ade"] = num_array(b.mean_ade);
  j["oracle_fde"] = num(b.oracle_fde);
  j["baseline_expert"] = b.baseline_expert;
  j["baseline_fde"] = num(b.baseline_fde);
  j["gate_fde"] = num(b.gate_fde);
  j["gate_ade"] = num(b.gate_ade);
  j["orr"] = b.orr ? num(*b.orr) : ordered_json(nullptr);
  j["p95_fde"] = num(b.p95_fde);
  j["selection_accuracy"] = num(b.selection_accuracy);
  j["utilization"] = num_array(b.utilization);
  j["trigger_rate"] = num(b.trigger_rate);
  j["llm_answer_rate"] = num(b.llm_answer_rate);
  j["override_rate"] = num(b.override_rate);
  j["rule_override_rate"] = num(b.rule_override_rate);
  j["llm_override_rate"] = num(b.llm_override_rate);
  j["cost_fraction"] = num(b.cost_fraction);
  j["expensive_invocation_rate"] = num(b.expensive_invocation_rate);
  return j;
}

AggregateBlock block_from_json(const json & j)
{
  AggregateBlock b;
  b.scenes = field(j, "scenes").get<std::size_t>();
  b.mean_fde = get_scores(field(j, "mean_fde"));
  b.mean_ade = get_scores(field(j, "mean_ade"));
  b.oracle_fde = get_num(field(j, "oracle_fde"));
  b.baseline_expert = field(j, "baseline_expert").get<int>();
  b.baseline_fde = get_num(field(j, "baseline_fde"));
  b.gate_fde = get_num(field(j, "gate_fde"));
  b.gate_ade = get_num(field(j, "gate_ade"));
  if (!field(j, "orr").is_null()) {
    b.orr = j["orr"].get<double>();
  }
  b.p95_fde = get_num(field(j, "p95_fde"));
  b.selection_accuracy = get_num(field(j, "selection_accuracy"));
  b.utilization = get_scores(field(j, "utilization"));
  b.trigger_rate = get_num(field(j, "trigger_rate"));
  b.llm_answer_rate = get_num(field(j, "llm_answer_rate"));
  b.override_rate = get_num(field(j, "override_rate"));
  b.rule_override_rate = get_num(field(j, "rule_override_rate"));
  b.llm_override_rate = get_num(field(j, "llm_override_rate"));
  b.cost_fraction = get_num(field(j, "cost_fraction"));
  b.expensive_invocation_rate = get_num(field(j, "expensive_invocation_rate"));
  return b;
}

OverrideSource parse_override_source(const std::string & s)
{
  for (auto o : {OverrideSource::None, OverrideSource::Rule, OverrideSource::Llm}) {
    if (to_string(o) == s) {
      return o;
    }
  }
  throw DataError("unknown override source '" + s + "'");
}

std::string fmt(double v, int decimals = 3)
{
  if (!std::isfinite(v)) {
    return "n/a";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string fmt_orr(const std::optional<double> & v)
{
  return v ? fmt(*v, 1) + "%" : "n/a";
}

constexpr const char * kExpertLabels[kNumExperts] = {"physics", "interactive", "curvature"};

}  // namespace

std::string report_to_json(const EvaluationReport & report, bool with_metadata)
{
  ordered_json j;
  j["format"] = "gatekit-report";
  j["evaluation"] = "horizon-clamped replay on synthetic scenes";
  j["fingerprint"] = {{"strategy", report.fingerprint.strategy},
    {"preset", report.fingerprint.preset}, {"train_seed", report.fingerprint.train_seed},
    {"eval_seed", report.fingerprint.eval_seed}, {"supervisor", report.fingerprint.supervisor}};
  j["aggregate"] = block_to_json(report.aggregate);
  ordered_json slices = ordered_json::object();
  for (const auto & [tag, b] : report.slices) {
    slices[std::string(to_string(tag))] = block_to_json(b);
  }
  j["slices"] = slices;
  ordered_json rows = ordered_json::array();
  for (const auto & r : report.per_scene) {
    ordered_json s;
    s["id"] = r.id;
    s["tag"] = std::string(to_string(r.tag));
    s["fde"] = num_array(r.fde);
    s["ade"] = num_array(r.ade);
    s["oracle"] = r.oracle;
    s["chosen"] = r.decision.chosen;
    s["scores"] = num_array(r.decision.scores);
    s["confidence"] = num(r.decision.confidence);
    s["triggered"] = r.triggered;
    s["llm_answered"] = r.llm_answered;
    s["overridden"] = r.decision.overridden;
    s["override_source"] = std::string(to_string(r.decision.override_source));
    s["chosen_fde"] = num(r.chosen_fde);
    s["chosen_ade"] = num(r.chosen_ade);
    s["cost_spent"] = num(r.cost_spent);
    s["expensive_invoked"] = r.expensive_invoked;
    rows.push_back(std::move(s));
  }
  j["per_scene"] = rows;
  ordered_json failures = ordered_json::array();
  for (const auto & f : report.failures) {
    failures.push_back({{"index", f.line}, {"reason", f.reason}});
  }
  j["failures"] = failures;
  if (with_metadata) {
    j["metadata"] = report.metadata;
  }
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string & text)
{
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DataError("report is not a JSON object");
  }
  if (!j.contains("format") || j["format"] != "gatekit-report") {
    throw DataError("not a gatekit report");
  }
  try {
    EvaluationReport r;
    const auto & fp = field(j, "fingerprint");
    r.fingerprint.strategy = field(fp, "strategy").get<std::string>();
    r.fingerprint.preset = field(fp, "preset").get<std::string>();
    r.fingerprint.train_seed = field(fp, "train_seed").get<std::uint64_t>();
    r.fingerprint.eval_seed = field(fp, "eval_seed").get<std::uint64_t>();
    r.fingerprint.supervisor = field(fp, "supervisor").get<std::string>();
    r.aggregate = block_from_json(field(j, "aggregate"));
    for (const auto & [name, b] : field(j, "slices").items()) {
      const auto tag = parse_scenario_tag(name);
      if (!tag) {
        throw DataError("unknown slice tag '" + name + "'");
      }
      r.slices[*tag] = block_from_json(b);
    }
    for (const auto & s : field(j, "per_scene")) {
      SceneResult x;
      x.id = field(s, "id").get<std::string>();
      const auto tag = parse_scenario_tag(field(s, "tag").get<std::string>());
      if (!tag) {
        throw DataError("unknown scene tag in per_scene");
      }
      x.tag = *tag;
      x.fde = get_scores(field(s, "fde"));
      x.ade = get_scores(field(s, "ade"));
      x.oracle = field(s, "oracle").get<int>();
      x.decision.chosen = field(s, "chosen").get<int>();
      x.decision.scores = get_scores(field(s, "scores"));
      x.decision.confidence = get_num(field(s, "confidence"));
      x.triggered = field(s, "triggered").get<bool>();
      x.llm_answered = field(s, "llm_answered").get<bool>();
      x.decision.overridden = field(s, "overridden").get<bool>();
      x.decision.override_source = parse_override_source(
        field(s, "override_source").get<std::string>());
      x.chosen_fde = get_num(field(s, "chosen_fde"));
      x.chosen_ade = get_num(field(s, "chosen_ade"));
      x.cost_spent = get_num(field(s, "cost_spent"));
      x.expensive_invoked = field(s, "expensive_invoked").get<bool>();
      r.per_scene.push_back(std::move(x));
    }
    for (const auto & f : field(j, "failures")) {
      r.failures.push_back({field(f, "index").get<std::size_t>(),
          field(f, "reason").get<std::string>()});
    }
    if (j.contains("metadata")) {
      r.metadata = j["metadata"].get<std::map<std::string, std::string>>();
    }
    return r;
  } catch (const json::exception & e) {
    throw DataError(std::string("malformed report (") + e.what() + ")");
  }
}

std::string report_markdown(const EvaluationReport & report)
{
  const auto & a = report.aggregate;
  std::ostringstream md;
  md << "# Gate evaluation\n\n";
  md << "Strategy `" << report.fingerprint.strategy << "`, preset `" << report.fingerprint.preset
     << "`, supervisor `" << report.fingerprint.supervisor << "`, train seed "
     << report.fingerprint.train_seed << ", eval seed " << report.fingerprint.eval_seed
     << ". Horizon-clamped replay over " << a.scenes << " synthetic scenes";
  if (!report.failures.empty()) {
    md << " (" << report.failures.size() << " quarantined)";
  }
  md << ".\n\n";
  md << "| Method | ADE (m) | FDE (m) | Utilization |\n";
  md << "|---|---|---|---|\n";
  for (int k = 0; k < kNumExperts; ++k) {
    md << "| " << kExpertLabels[k] << (k == a.baseline_expert ? " (baseline)" : "") << " | "
       << fmt(a.mean_ade[static_cast<std::size_t>(k)]) << " | "
       << fmt(a.mean_fde[static_cast<std::size_t>(k)]) << " | "
       << fmt(100.0 * a.utilization[static_cast<std::size_t>(k)], 1) << "% |\n";
  }
  md << "| gate | " << fmt(a.gate_ade) << " | " << fmt(a.gate_fde) << " | |\n";
  md << "| oracle | | " << fmt(a.oracle_fde) << " | |\n\n";
  md << "| ORR | P95 FDE (m) | Selection accuracy | Trigger rate | Override rate | Cost fraction |\n";
  md << "|---|---|---|---|---|---|\n";
  md << "| " << fmt_orr(a.orr) << " | " << fmt(a.p95_fde) << " | "
     << fmt(100.0 * a.selection_accuracy, 1) << "% | " << fmt(100.0 * a.trigger_rate, 1) << "% | "
     << fmt(100.0 * a.override_rate, 1) << "% | " << fmt(a.cost_fraction) << " |\n\n";
  const auto table = slice_report(report);
  md << "## Scenario slices\n\n";
  md << "| Tag | Scenes | Baseline FDE (m) | Gate FDE (m) | Reduction | ORR |\n";
  md << "|---|---|---|---|---|---|\n";
  for (const auto & row : table.rows) {
    md << "| " << to_string(row.tag) << " | " << row.scenes << " | " << fmt(row.baseline_fde)
       << " | " << fmt(row.gate_fde) << " | " << fmt(row.reduction_percent, 1) << "% | "
       << fmt_orr(report.slices.at(row.tag).orr) << " |\n";
  }
  for (const auto & note : table.notes) {
    md << "\n" << note << "\n";
  }
  return md.str();
}

std::string summary_table(const EvaluationReport & report)
{
  const auto & a = report.aggregate;
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %10s %10s %8s\n", "method", "ADE", "FDE", "util");
  out << line;
  for (int k = 0; k < kNumExperts; ++k) {
    const auto i = static_cast<std::size_t>(k);
    std::snprintf(line, sizeof(line), "%-12s %10.3f %10.3f %7.1f%%\n", kExpertLabels[k],
      a.mean_ade[i], a.mean_fde[i], 100.0 * a.utilization[i]);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-12s %10.3f %10.3f\n", "gate", a.gate_ade, a.gate_fde);
  out << line;
  std::snprintf(line, sizeof(line), "%-12s %10s %10.3f\n", "oracle", "", a.oracle_fde);
  out << line;
  out << "ORR " << fmt_orr(a.orr) << "  P95 " << fmt(a.p95_fde) << "  accuracy "
      << fmt(100.0 * a.selection_accuracy, 1) << "%  triggers " << fmt(100.0 * a.trigger_rate, 1)
      << "%  overrides " << fmt(100.0 * a.override_rate, 1) << "%  cost " << fmt(a.cost_fraction)
      << "\n";
  if (!report.failures.empty()) {
    out << report.failures.size() << " scene(s) quarantined\n";
  }
  return out.str();
}

SliceTable slice_report(const EvaluationReport & report)
{
  SliceTable t;
  for (auto tag : kAllScenarioTags) {
    const auto it = report.slices.find(tag);
    if (it == report.slices.end() || it->second.scenes == 0) {
      t.notes.push_back("No " + std::string(to_string(tag)) + " scenes; slice omitted.");
      continue;
    }
    SliceRow row;
    row.tag = tag;
    row.scenes = it->second.scenes;
    row.baseline_fde = it->second.baseline_fde;
    row.gate_fde = it->second.gate_fde;
    row.reduction_percent = row.baseline_fde > 0.0 ?
      percent_reduction(row.baseline_fde, row.gate_fde) : 0.0;
    t.rows.push_back(row);
  }
  return t;
}

std::string slice_csv(const SliceTable & table)
{
  std::string text = "tag,scenes,baseline_fde,gate_fde,reduction_percent\n";
  for (const auto & r : table.rows) {
    text += std::string(to_string(r.tag)) + "," + std::to_string(r.scenes) + "," +
      format_sig9(r.baseline_fde) + "," + format_sig9(r.gate_fde) + "," +
      format_sig9(r.reduction_percent) + "\n";
  }
  return text;
}

std::string utilization_csv(const EvaluationReport & report)
{
  std::string text = "scope,physics,interactive,curvature\n";
  const auto row = [&](const std::string & scope, const AggregateBlock & b) {
      text += scope;
      for (double u : b.utilization) {
        text += "," + format_sig9(u);
      }
      text += "\n";
    };
  row("all", report.aggregate);
  for (const auto & [tag, b] : report.slices) {
    row(std::string(to_string(tag)), b);
  }
  return text;
}

// ---------------------------------------------------------------------------
// Ablation

std::string AblationArm::label() const
{
  std::string s(to_string(strategy));
  if (supervisor != SupervisorMode::Off) {
    s += "+" + std::string(to_string(supervisor));
  }
  return s;
}

std::vector<AblationArm> default_arms()
{
  std::vector<AblationArm> arms;
  for (auto s : kAllStrategies) {
    arms.push_back({s, SupervisorMode::Off});
  }
  arms.push_back({Strategy::Ranking, SupervisorMode::Rule});
  return arms;
}

Estimate estimate(const std::vector<double> & values)
{
  Estimate e;
  if (values.empty()) {
    e.mean = kNaN;
    return e;
  }
  const double n = static_cast<double>(values.size());
  e.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - e.mean) * (v - e.mean);
    }
    e.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return e;
}

std::vector<AblationRow> ablate(
  const std::vector<Scene> & scenes, const std::vector<SceneSample> & samples,
  const std::vector<AblationArm> & arms, const AblationOptions & options)
{
  if (arms.size() < 2) {
    throw ContractError("an ablation needs at least 2 arms");
  }
  if (scenes.size() != samples.size()) {
    throw ContractError("scenes and samples must align");
  }
  if (options.folds < 2 || samples.size() < static_cast<std::size_t>(options.folds)) {
    throw ContractError("cross-fitting needs >= 2 folds and at least one sample per fold");
  }
  if (options.seeds.empty()) {
    throw ContractError("an ablation needs at least one seed");
  }
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].id != samples[i].id) {
      throw ContractError("scene " + scenes[i].id + " does not match sample " + samples[i].id);
    }
  }
  options.train.validate();
  options.trigger.validate();

  const auto data = training_samples(samples);
  const double n = static_cast<double>(data.size());
  ExpertScores column{};
  double oracle_fde = 0.0;
  for (const auto & t : data) {
    for (std::size_t k = 0; k < column.size(); ++k) {
      column[k] += t.fde[k] / n;
    }
    oracle_fde += t.fde[static_cast<std::size_t>(oracle_index(t.fde))] / n;
  }
  const double baseline = *std::min_element(column.begin(), column.end());
  const ExpertPool pool = ExpertPool::standard();
  const double full_cost = total_cost(pool);
  const double stage_one_cost =
    (pool[kPhysicsExpert].id().cost_weight + pool[kCurvatureExpert].id().cost_weight) / full_cost;

  std::vector<AblationRow> rows(arms.size());
  for (std::size_t a = 0; a < arms.size(); ++a) {
    rows[a].arm = arms[a];
    rows[a].feature_set = std::string(feature_set_name(arms[a].strategy));
    rows[a].preset = options.train.preset;
  }

  const auto folds = static_cast<std::size_t>(options.folds);
  for (auto seed : options.seeds) {
    std::vector<std::size_t> fold(data.size());
    {
      std::vector<std::size_t> idx(data.size());
      std::iota(idx.begin(), idx.end(), 0);
      Rng rng(seed);
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        fold[idx[i]] = i % folds;
      }
    }
    TrainConfig config = options.train;
    config.seed = seed;
    // Arms that share a strategy share its trained gates.
    std::map<Strategy, std::vector<GateModel>> models;
    std::map<Strategy, std::string> failed;
    for (const auto & arm : arms) {
      if (models.count(arm.strategy) || failed.count(arm.strategy)) {
        continue;
      }
      try {
        std::vector<GateModel> per_fold;
        for (std::size_t k = 0; k < folds; ++k) {
          std::vector<TrainingSample> train_set;
          for (std::size_t i = 0; i < data.size(); ++i) {
            if (fold[i] != k) {
              train_set.push_back(data[i]);
            }
          }
          per_fold.push_back(train(arm.strategy, train_set, config));
        }
        models[arm.strategy] = std::move(per_fold);
      } catch (const std::exception & e) {
        failed[arm.strategy] = e.what();
      }
    }

    for (std::size_t a = 0; a < arms.size(); ++a) {
      auto & row = rows[a];
      const auto & arm = arms[a];
      if (failed.count(arm.strategy)) {
        row.error = failed[arm.strategy];
        continue;
      }
      const auto & per_fold = models[arm.strategy];
      std::vector<double> chosen(data.size());
      double cost = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto & m = per_fold[fold[i]];
        auto d = decide(m, data[i].features);
        if (arm.strategy == Strategy::TwoStage) {
          cost += stage_one_decide(m, data[i].features).commit ? stage_one_cost : 1.0;
        } else {
          cost += 1.0;
        }
        if (arm.supervisor != SupervisorMode::Off &&
          should_trigger(d, scenes[i], data[i].features, options.trigger))
        {
          d = apply_override(d, rule_policy(scenes[i], data[i].features, d), OverrideSource::Rule);
        }
        chosen[i] = data[i].fde[static_cast<std::size_t>(d.chosen)];
      }
      const double gate = std::accumulate(chosen.begin(), chosen.end(), 0.0) / n;
      row.seeds.push_back(seed);
      row.fde.push_back(gate);
      row.orr.push_back(baseline > oracle_fde + 1e-12 ?
        orr(baseline, gate, oracle_fde).percent : kNaN);
      row.p95.push_back(percentile(chosen, 0.95));
      row.cost.push_back(cost / n);
    }
  }
  return rows;
}

namespace
{

std::string ci_cell(const Estimate & e)
{
  return e.ci95 ? format_sig9(*e.ci95) : "";
}

std::string pm(const Estimate & e, int decimals)
{
  std::string s = fmt(e.mean, decimals);
  if (e.ci95) {
    s += " ± " + fmt(*e.ci95, decimals);
  }
  return s;
}

}  // namespace

std::string ablation_csv(const std::vector<AblationRow> & rows)
{
  std::string text = "arm,strategy,supervisor,feature_set,preset,seeds,fde_mean,fde_ci95,orr_mean,"
    "orr_ci95,p95_mean,p95_ci95,cost_mean,cost_ci95,error\n";
  for (const auto & r : rows) {
    const auto f = estimate(r.fde);
    const auto o = estimate(r.orr);
    const auto p = estimate(r.p95);
    const auto c = estimate(r.cost);
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    text += r.arm.label() + "," + std::string(to_string(r.arm.strategy)) + "," +
      std::string(to_string(r.arm.supervisor)) + "," + r.feature_set + "," + r.preset + "," +
      std::to_string(r.seeds.size()) + "," +
      (r.fde.empty() ? "," : format_sig9(f.mean) + "," + ci_cell(f)) + "," +
      (r.orr.empty() ? "," : format_sig9(o.mean) + "," + ci_cell(o)) + "," +
      (r.p95.empty() ? "," : format_sig9(p.mean) + "," + ci_cell(p)) + "," +
      (r.cost.empty() ? "," : format_sig9(c.mean) + "," + ci_cell(c)) + "," + err + "\n";
  }
  return text;
}

std::string ablation_markdown(const std::vector<AblationRow> & rows)
{
  std::ostringstream md;
  md << "| Strategy | Features | FDE (m) | ORR (%) | P95 FDE (m) | Cost fraction | Seeds |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto & r : rows) {
    md << "| " << r.arm.label() << " | " << r.feature_set << " | ";
    if (!r.error.empty() && r.fde.empty()) {
      md << "error: " << r.error << " | | | | " << r.seeds.size() << " |\n";
      continue;
    }
    md << pm(estimate(r.fde), 3) << " | " << pm(estimate(r.orr), 1) << " | "
       << pm(estimate(r.p95), 3) << " | " << pm(estimate(r.cost), 3) << " | " << r.seeds.size()
       << " |\n";
  }
  if (!rows.empty()) {
    md << "\nPreset `" << rows.front().preset << "`. Intervals are 1.96 sd / sqrt(n) over seeds.\n";
  }
  return md.str();
}

// ---------------------------------------------------------------------------
// Config

namespace
{

void check_keys(const json & j, const std::string & section, std::initializer_list<const char *> keys)
{
  if (!j.is_object()) {
    throw DataError("config section '" + section + "' must be an object");
  }
  for (const auto & [key, value] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char * k) {return key == k;})) {
      throw DataError("unknown config key '" + section + "." + key + "'");
    }
  }
}

ScenarioTag tag_or_throw(const std::string & name)
{
  const auto tag = parse_scenario_tag(name);
  if (!tag) {
    throw DataError("unknown scenario tag '" + name + "'");
  }
  return *tag;
}

template<typename T>
void maybe(const json & j, const char * key, T & out)
{
  if (j.contains(key)) {
    out = j[key].get<T>();
  }
}

AblationArm parse_arm(const std::string & text)
{
  AblationArm arm;
  const auto plus = text.find('+');
  arm.strategy = parse_strategy(text.substr(0, plus));
  if (plus != std::string::npos) {
    arm.supervisor = parse_supervisor_mode(text.substr(plus + 1));
    if (arm.supervisor == SupervisorMode::Llm) {
      throw DataError("ablation arms support the rule supervisor only");
    }
  }
  return arm;
}

}  // namespace

HarnessConfig config_from_json(const std::string & text, std::optional<std::string> preset)
{
  const json j = json::parse(text, nullptr, false, true);
  if (j.is_discarded()) {
    throw DataError("config is not valid JSON");
  }
  try {
    check_keys(j, "(root)", {"generator", "train", "trigger", "endpoint", "features", "ablation"});
    HarnessConfig c;

    if (j.contains("generator")) {
      const auto & g = j["generator"];
      check_keys(g, "generator", {"seed", "counts", "noise_position_std", "noise_velocity_std",
          "speed_ranges", "horizons"});
      maybe(g, "seed", c.generator.seed);
      maybe(g, "noise_position_std", c.generator.noise_position_std);
      maybe(g, "noise_velocity_std", c.generator.noise_velocity_std);
      if (g.contains("counts")) {
        for (auto tag : kAllScenarioTags) {
          c.generator.counts[tag] = 0;
        }
        for (const auto & [name, n] : g["counts"].items()) {
          c.generator.counts[tag_or_throw(name)] = n.get<int>();
        }
      }
      if (g.contains("speed_ranges")) {
        for (const auto & [name, r] : g["speed_ranges"].items()) {
          const auto lohi = r.get<std::vector<double>>();
          if (lohi.size() != 2) {
            throw DataError("speed range for " + name + " must be [lo, hi]");
          }
          c.generator.speed_ranges[tag_or_throw(name)] = {lohi[0], lohi[1]};
        }
      }
      if (g.contains("horizons")) {
        const auto & h = g["horizons"];
        check_keys(h, "generator.horizons", {"t_history_s", "t_future_s", "rate_hz"});
        maybe(h, "t_history_s", c.generator.horizons.t_history_s);
        maybe(h, "t_future_s", c.generator.horizons.t_future_s);
        maybe(h, "rate_hz", c.generator.horizons.rate_hz);
      }
    }

    std::string preset_name = "appendix-a";
    if (j.contains("train") && j["train"].contains("preset")) {
      preset_name = j["train"]["preset"].get<std::string>();
    }
    if (preset) {
      preset_name = *preset;
    }
    c.train = TrainConfig::from_preset(preset_name);
    if (j.contains("train")) {
      const auto & t = j["train"];
      check_keys(t, "train", {"preset", "strategy", "epochs", "batch_size", "learning_rate",
          "beta1", "beta2", "epsilon", "tie_epsilon", "seed", "validation_folds",
          "confidence_threshold"});
      if (t.contains("strategy")) {
        c.strategy = parse_strategy(t["strategy"].get<std::string>());
      }
      maybe(t, "epochs", c.train.epochs);
      maybe(t, "batch_size", c.train.batch_size);
      maybe(t, "learning_rate", c.train.learning_rate);
      maybe(t, "beta1", c.train.beta1);
      maybe(t, "beta2", c.train.beta2);
      maybe(t, "epsilon", c.train.epsilon);
      maybe(t, "tie_epsilon", c.train.tie_epsilon);
      maybe(t, "seed", c.train.seed);
      maybe(t, "validation_folds", c.train.validation_folds);
      maybe(t, "confidence_threshold", c.train.confidence_threshold);
    }

    if (j.contains("trigger")) {
      const auto & t = j["trigger"];
      check_keys(t, "trigger", {"confidence_threshold", "semantic_tags", "risk_accel_limit",
          "risk_curvature_limit"});
      maybe(t, "confidence_threshold", c.trigger.confidence_threshold);
      maybe(t, "risk_accel_limit", c.trigger.risk_accel_limit);
      maybe(t, "risk_curvature_limit", c.trigger.risk_curvature_limit);
      if (t.contains("semantic_tags")) {
        c.trigger.semantic_tags.clear();
        for (const auto & name : t["semantic_tags"].get<std::vector<std::string>>()) {
          c.trigger.semantic_tags.insert(tag_or_throw(name));
        }
      }
    }

    if (j.contains("endpoint")) {
      const auto & e = j["endpoint"];
      check_keys(e, "endpoint", {"base_url", "model", "timeout_s", "max_in_flight"});
      maybe(e, "base_url", c.endpoint.base_url);
      maybe(e, "model", c.endpoint.model);
      maybe(e, "timeout_s", c.endpoint.timeout_s);
      maybe(e, "max_in_flight", c.endpoint.max_in_flight);
    }

    if (j.contains("features")) {
      const auto & f = j["features"];
      check_keys(f, "features", {"stochastic_passes", "perturbation_samples",
          "perturbation_noise", "accel_limit", "curvature_limit"});
      maybe(f, "stochastic_passes", c.features.stochastic_passes);
      maybe(f, "perturbation_samples", c.features.perturbation_samples);
      maybe(f, "perturbation_noise", c.features.perturbation_noise);
      maybe(f, "accel_limit", c.features.accel_limit);
      maybe(f, "curvature_limit", c.features.curvature_limit);
    }
    c.features.horizons = c.generator.horizons;

    if (j.contains("ablation")) {
      const auto & a = j["ablation"];
      check_keys(a, "ablation", {"seeds", "arms"});
      maybe(a, "seeds", c.ablation_seeds);
      if (a.contains("arms")) {
        c.ablation_arms.clear();
        for (const auto & s : a["arms"].get<std::vector<std::string>>()) {
          c.ablation_arms.push_back(parse_arm(s));
        }
      }
    }

    c.generator.validate();
    c.train.validate();
    c.trigger.validate();
    return c;
  } catch (const json::exception & e) {
    throw DataError(std::string("config has a wrong value type (") + e.what() + ")");
  } catch (const ContractError & e) {
    throw DataError(std::string("config: ") + e.what());
  }
}

HarnessConfig load_config(const std::string & path, std::optional<std::string> preset)
{
  return config_from_json(read_file(path), std::move(preset));
}

}  // namespace gatekit
