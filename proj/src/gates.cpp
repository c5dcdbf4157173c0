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

#include "gatekit/gates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "gatekit/random.hpp"

namespace gatekit
{

namespace
{

struct StrategyName
{
  Strategy strategy;
  std::string_view name;
  std::string_view features;
};

constexpr std::array<StrategyName, 8> kStrategyNames = {{
  {Strategy::Thresholding, "thresholding", "geometric (hand rule)"},
  {Strategy::ClassificationGeo, "classification-geo", "geometric"},
  {Strategy::ClassificationMeta, "classification-meta", "meta"},
  {Strategy::RegressionFde, "regression-fde", "meta"},
  {Strategy::QuantileQ75, "quantile-q75", "meta"},
  {Strategy::RiskQ90, "risk-q90", "meta"},
  {Strategy::Ranking, "ranking", "meta"},
  {Strategy::TwoStage, "two-stage", "meta (cheap first)"},
}};

bool predicts_errors(Strategy s)
{
  return s == Strategy::RegressionFde || s == Strategy::QuantileQ75 || s == Strategy::RiskQ90;
}

double quantile_level(Strategy s)
{
  return s == Strategy::QuantileQ75 ? 0.75 : 0.90;
}

std::string canonical(std::string_view text)
{
  std::string out;
  for (char c : text) {
    if (c == '_' || c == ' ') {
      c = '-';
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

double softplus(double x)
{
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x)
{
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(Strategy s)
{
  for (const auto & n : kStrategyNames) {
    if (n.strategy == s) {
      return n.name;
    }
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text)
{
  const auto key = canonical(text);
  for (const auto & n : kStrategyNames) {
    if (n.name == key) {
      return n.strategy;
    }
  }
  throw ContractError("unknown strategy '" + std::string(text) + "'");
}

std::string_view feature_set_name(Strategy s)
{
  for (const auto & n : kStrategyNames) {
    if (n.strategy == s) {
      return n.features;
    }
  }
  return "unknown";
}

std::string_view to_string(OverrideSource s)
{
  switch (s) {
    case OverrideSource::None:
      return "none";
    case OverrideSource::Rule:
      return "rule";
    case OverrideSource::Llm:
      return "llm";
  }
  return "none";
}

TrainConfig TrainConfig::appendix_a()
{
  return TrainConfig{};
}

TrainConfig TrainConfig::main_text()
{
  TrainConfig c;
  c.epochs = 30;
  c.batch_size = 128;
  c.learning_rate = 5e-4;
  c.preset = "main-text";
  return c;
}

TrainConfig TrainConfig::from_preset(std::string_view name)
{
  const auto key = canonical(name);
  if (key == "appendix-a") {
    return appendix_a();
  }
  if (key == "main-text") {
    return main_text();
  }
  throw ContractError("unknown preset '" + std::string(name) + "' (appendix-a, main-text)");
}

void TrainConfig::validate() const
{
  if (epochs < 1) {
    throw ContractError("epochs must be >= 1");
  }
  if (batch_size < 1) {
    throw ContractError("batch_size must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw ContractError("learning_rate must be positive");
  }
  if (validation_folds < 2) {
    throw ContractError("validation_folds must be >= 2");
  }
  if (!(tie_epsilon >= 0.0)) {
    throw ContractError("tie_epsilon must be non-negative");
  }
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw ContractError("confidence_threshold must lie in [0, 1]");
  }
}

void GateModel::validate() const
{
  const auto check_head = [](const GateHead & h, const char * what) {
      if (h.mlp.dims() != kGateLayerDims) {
        throw ContractError(std::string(what) + " network does not match 36-64-32-3");
      }
      const auto & layers = h.mlp.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].weight.rows() != kGateLayerDims[l + 1] ||
          layers[l].weight.cols() != kGateLayerDims[l] ||
          layers[l].bias.size() != kGateLayerDims[l + 1])
        {
          throw ContractError(std::string(what) + " layer " + std::to_string(l) +
                  " has the wrong shape");
        }
      }
      if (std::none_of(h.mask.begin(), h.mask.end(), [](bool b) {return b;})) {
        throw ContractError(std::string(what) + " feature mask selects no slot");
      }
    };
  if (strategy != Strategy::Thresholding) {
    check_head(head, "gate");
  }
  if (strategy == Strategy::TwoStage) {
    if (!stage_one) {
      throw ContractError("two-stage model lacks its stage-one head");
    }
    check_head(*stage_one, "stage-one");
  }
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw ContractError("confidence_threshold must lie in [0, 1]");
  }
}

int oracle_index(const ExpertScores & fde)
{
  int best = 0;
  for (int k = 1; k < kNumExperts; ++k) {
    if (fde[static_cast<std::size_t>(k)] < fde[static_cast<std::size_t>(best)]) {
      best = k;
    }
  }
  return best;
}

int argmax(const ExpertScores & scores)
{
  int best = 0;
  for (int k = 1; k < kNumExperts; ++k) {
    if (scores[static_cast<std::size_t>(k)] > scores[static_cast<std::size_t>(best)]) {
      best = k;
    }
  }
  return best;
}

ExpertScores softmax(const ExpertScores & scores)
{
  const double top = *std::max_element(scores.begin(), scores.end());
  ExpertScores p{};
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(scores[k] - top);
    sum += p[k];
  }
  for (auto & v : p) {
    v /= sum;
  }
  return p;
}

GateDecision decision_from_scores(const ExpertScores & scores)
{
  GateDecision d;
  d.scores = scores;
  d.chosen = argmax(scores);
  d.confidence = softmax(scores)[static_cast<std::size_t>(d.chosen)];
  return d;
}

Eigen::VectorXd prepare_input(const GateHead & head, const MetaFeatureVector & raw)
{
  const auto z = apply_normalizer(head.normalizer, raw);
  Eigen::VectorXd x(static_cast<Eigen::Index>(kFeatureDim));
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    x(static_cast<Eigen::Index>(i)) = head.mask[i] ? z[i] : 0.0;
  }
  return x;
}

ExpertScores head_outputs(const GateHead & head, const MetaFeatureVector & raw)
{
  const Eigen::VectorXd y = head.mlp.forward_one(prepare_input(head, raw));
  ExpertScores out{};
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = y(static_cast<Eigen::Index>(k));
  }
  return out;
}

ExpertScores forward(const GateModel & model, const MetaFeatureVector & raw)
{
  auto out = head_outputs(model.head, raw);
  if (predicts_errors(model.strategy)) {
    for (auto & v : out) {
      v = -v;
    }
  }
  return out;
}

RankingLoss ranking_loss(double s_i, double s_j, bool i_better)
{
  const double d = s_i - s_j;
  RankingLoss r;
  // dL/dd = sigma(d) - y
  const double g = sigmoid(d) - (i_better ? 1.0 : 0.0);
  r.loss = i_better ? softplus(-d) : softplus(d);
  r.d_si = g;
  r.d_sj = -g;
  return r;
}

std::vector<RankingPair> build_pairs(const ExpertScores & fde, double tie_epsilon)
{
  std::vector<RankingPair> pairs;
  for (int i = 0; i < kNumExperts; ++i) {
    for (int j = i + 1; j < kNumExperts; ++j) {
      const double fi = fde[static_cast<std::size_t>(i)];
      const double fj = fde[static_cast<std::size_t>(j)];
      if (std::abs(fi - fj) < tie_epsilon || fi == fj) {
        continue;
      }
      pairs.push_back({i, j, fi < fj});
    }
  }
  return pairs;
}

namespace
{

struct Dataset
{
  Eigen::MatrixXd x;  // prepared inputs
  std::vector<ExpertScores> fde;
  std::vector<int> label;
};

Dataset prepare(const GateHead & head, const std::vector<TrainingSample> & data,
  const std::vector<std::size_t> & idx)
{
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(kFeatureDim));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    d.x.row(static_cast<Eigen::Index>(r)) = prepare_input(head, data[idx[r]].features).transpose();
    d.fde.push_back(data[idx[r]].fde);
    d.label.push_back(oracle_index(data[idx[r]].fde));
  }
  return d;
}

/// Per-epoch selection totals on a validation fold; folds pool by addition.
struct SelectionTotals
{
  double gate{0.0};
  double oracle{0.0};
  ExpertScores column{};
  double hits{0.0};
  double count{0.0};

  SelectionTotals & operator+=(const SelectionTotals & o)
  {
    gate += o.gate;
    oracle += o.oracle;
    for (std::size_t k = 0; k < column.size(); ++k) {
      column[k] += o.column[k];
    }
    hits += o.hits;
    count += o.count;
    return *this;
  }

  double gate_fde() const { return gate / count; }
  double accuracy() const { return hits / count; }
  double orr() const
  {
    const double base = *std::min_element(column.begin(), column.end()) / count;
    const double gap = base - oracle / count;
    return gap > 1e-12 ? 100.0 * (base - gate_fde()) / gap : 0.0;
  }
};

SelectionTotals score_selection(Strategy strategy, const Mlp & mlp, const Dataset & d)
{
  const Eigen::MatrixXd out = mlp.forward(d.x);
  SelectionTotals t;
  for (std::size_t r = 0; r < d.fde.size(); ++r) {
    ExpertScores s{};
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double v = out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
      s[k] = predicts_errors(strategy) ? -v : v;
      t.column[k] += d.fde[r][k];
    }
    const int c = argmax(s);
    t.gate += d.fde[r][static_cast<std::size_t>(c)];
    t.oracle += d.fde[r][static_cast<std::size_t>(d.label[r])];
    t.hits += c == d.label[r] ? 1.0 : 0.0;
    t.count += 1.0;
  }
  return t;
}

/// Loss and dL/d(outputs) for one batch, averaged over the batch.
double batch_gradient(
  Strategy strategy, const Eigen::MatrixXd & out, const Dataset & d,
  const std::vector<std::size_t> & rows, const ExpertScores & class_weight, double tie_epsilon,
  Eigen::MatrixXd & grad)
{
  const auto b = static_cast<double>(rows.size());
  grad.setZero(out.rows(), out.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    const auto & fde = d.fde[rows[r]];
    switch (strategy) {
      case Strategy::Ranking:
      case Strategy::TwoStage:
        for (const auto & p : build_pairs(fde, tie_epsilon)) {
          const auto rl = ranking_loss(out(row, p.i), out(row, p.j), p.i_better);
          loss += rl.loss;
          grad(row, p.i) += rl.d_si / b;
          grad(row, p.j) += rl.d_sj / b;
        }
        break;
      case Strategy::ClassificationGeo:
      case Strategy::ClassificationMeta: {
          ExpertScores s{};
          for (std::size_t k = 0; k < s.size(); ++k) {
            s[k] = out(row, static_cast<Eigen::Index>(k));
          }
          const auto p = softmax(s);
          const auto y = static_cast<std::size_t>(d.label[rows[r]]);
          const double w = class_weight[y];
          loss += -w * std::log(std::max(p[y], 1e-300));
          for (std::size_t k = 0; k < p.size(); ++k) {
            grad(row, static_cast<Eigen::Index>(k)) += w * (p[k] - (k == y ? 1.0 : 0.0)) / b;
          }
          break;
        }
      case Strategy::RegressionFde:
        for (std::size_t k = 0; k < fde.size(); ++k) {
          const double e = out(row, static_cast<Eigen::Index>(k)) - fde[k];
          loss += e * e / kNumExperts;
          grad(row, static_cast<Eigen::Index>(k)) += 2.0 * e / (kNumExperts * b);
        }
        break;
      case Strategy::QuantileQ75:
      case Strategy::RiskQ90: {
          const double tau = quantile_level(strategy);
          for (std::size_t k = 0; k < fde.size(); ++k) {
            const double resid = fde[k] - out(row, static_cast<Eigen::Index>(k));
            loss += std::max(tau * resid, (tau - 1.0) * resid) / kNumExperts;
            const double g = resid > 0.0 ? -tau : (resid < 0.0 ? 1.0 - tau : 0.0);
            grad(row, static_cast<Eigen::Index>(k)) += g / (kNumExperts * b);
          }
          break;
        }
      case Strategy::Thresholding:
        break;
    }
  }
  return loss / b;
}

/// Trains one head for `epochs` epochs on `fit_idx`. With a non-empty
/// `val_idx`, appends that fold's selection totals after every epoch.
GateHead train_head(
  Strategy strategy, const FeatureMask & mask, const std::vector<TrainingSample> & data,
  const std::vector<std::size_t> & fit_idx, const std::vector<std::size_t> & val_idx,
  const TrainConfig & config, int epochs, std::uint64_t stream,
  std::vector<double> * train_loss, std::vector<SelectionTotals> * val_totals)
{
  GateHead head;
  head.mask = mask;
  std::vector<MetaFeatureVector> fit_vectors;
  for (auto i : fit_idx) {
    fit_vectors.push_back(data[i].features);
  }
  head.normalizer = fit_normalizer(fit_vectors);
  head.mlp = Mlp(kGateLayerDims, derive_seed(config.seed, stream));

  const Dataset fit = prepare(head, data, fit_idx);
  const Dataset val = prepare(head, data, val_idx);

  ExpertScores class_weight{};
  if (strategy == Strategy::ClassificationGeo || strategy == Strategy::ClassificationMeta) {
    ExpertScores count{};
    for (int y : fit.label) {
      count[static_cast<std::size_t>(y)] += 1.0;
    }
    const auto present = std::count_if(count.begin(), count.end(), [](double c) {return c > 0;});
    for (std::size_t k = 0; k < count.size(); ++k) {
      class_weight[k] = count[k] > 0.0 ?
        static_cast<double>(fit.label.size()) / (static_cast<double>(present) * count[k]) : 0.0;
    }
  }

  Adam adam(head.mlp, {config.learning_rate, config.beta1, config.beta2, config.epsilon});
  Rng rng(derive_seed(config.seed, stream + 7919));
  std::vector<std::size_t> order(fit_idx.size());
  std::iota(order.begin(), order.end(), 0);

  Mlp::Cache cache;
  Eigen::MatrixXd grad;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      std::vector<std::size_t> rows(order.begin() + static_cast<long>(start),
        order.begin() + static_cast<long>(stop));
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(rows.size()), fit.x.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = fit.x.row(static_cast<Eigen::Index>(rows[r]));
      }
      const Eigen::MatrixXd out = head.mlp.forward(xb, cache);
      epoch_loss += batch_gradient(strategy, out, fit, rows, class_weight, config.tie_epsilon, grad);
      adam.step(head.mlp, head.mlp.backward(cache, grad));
      ++batches;
    }
    if (train_loss != nullptr) {
      train_loss->push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1)));
    }
    if (val_totals != nullptr && !val_idx.empty()) {
      (*val_totals)[static_cast<std::size_t>(epoch)] += score_selection(strategy, head.mlp, val);
    }
  }
  return head;
}

/// Picks the epoch count by pooled validation ORR over internal folds, then
/// refits on everything for that many epochs.
GateHead select_and_fit(
  Strategy strategy, const FeatureMask & mask, const std::vector<TrainingSample> & data,
  const TrainConfig & config, std::uint64_t stream, TrainingLog & log)
{
  const std::size_t n = data.size();
  const auto folds = std::min<std::size_t>(static_cast<std::size_t>(config.validation_folds), n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng split_rng(derive_seed(config.seed, 0x76616c));
  std::shuffle(idx.begin(), idx.end(), split_rng);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    fold_of[idx[i]] = i % folds;
  }

  std::vector<SelectionTotals> pooled(static_cast<std::size_t>(config.epochs));
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> fit_idx;
    std::vector<std::size_t> val_idx;
    for (std::size_t i = 0; i < n; ++i) {
      (fold_of[i] == f ? val_idx : fit_idx).push_back(i);
    }
    train_head(strategy, mask, data, fit_idx, val_idx, config, config.epochs, stream, nullptr, &pooled);
  }

  log = TrainingLog{};
  int best = 0;
  for (int e = 0; e < config.epochs; ++e) {
    const auto & t = pooled[static_cast<std::size_t>(e)];
    log.val_fde.push_back(t.gate_fde());
    log.val_orr.push_back(t.orr());
    log.val_accuracy.push_back(t.accuracy());
    // Validation ORR is monotone in pooled gate FDE, so either ranks epochs.
    if (t.gate_fde() < pooled[static_cast<std::size_t>(best)].gate_fde()) {
      best = e;
    }
  }
  log.best_epoch = best;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  return train_head(strategy, mask, data, all, {}, config, best + 1, stream, &log.train_loss, nullptr);
}

}  // namespace

GateModel train(Strategy strategy, const std::vector<TrainingSample> & data, const TrainConfig & config)
{
  config.validate();
  if (data.empty()) {
    throw ContractError("cannot train a gate on an empty dataset");
  }
  if (data.size() < 10) {
    throw ContractError("gate training needs at least 10 samples, got " + std::to_string(data.size()));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].features.all_finite() ||
      std::any_of(data[i].fde.begin(), data[i].fde.end(), [](double v) {return !std::isfinite(v);}))
    {
      throw ContractError("training sample " + std::to_string(i) + " has non-finite values");
    }
  }

  GateModel model;
  model.strategy = strategy;
  model.seed = config.seed;
  model.epochs = config.epochs;
  model.preset = config.preset;
  model.confidence_threshold = config.confidence_threshold;
  if (strategy == Strategy::Thresholding) {
    return model;
  }

  std::array<int, kNumExperts> label_count{};
  bool any_pair = false;
  for (const auto & s : data) {
    ++label_count[static_cast<std::size_t>(oracle_index(s.fde))];
    any_pair = any_pair || !build_pairs(s.fde, config.tie_epsilon).empty();
  }
  const auto classes = std::count_if(label_count.begin(), label_count.end(), [](int c) {return c > 0;});
  if ((strategy == Strategy::ClassificationGeo || strategy == Strategy::ClassificationMeta) &&
    classes < 2)
  {
    throw ContractError("degenerate labels: every sample has the same oracle expert");
  }
  if ((strategy == Strategy::Ranking || strategy == Strategy::TwoStage) && !any_pair) {
    throw ContractError("degenerate labels: no expert pair differs by more than tie_epsilon");
  }

  const FeatureMask mask = strategy == Strategy::ClassificationGeo ? geometric_only_mask() :
    all_features_mask();
  const auto stream = static_cast<std::uint64_t>(strategy) + 1;
  model.head = select_and_fit(strategy, mask, data, config, stream, model.log);
  if (strategy == Strategy::TwoStage) {
    TrainingLog stage_log;
    model.stage_one = select_and_fit(Strategy::Ranking, without_expert_mask(kInteractiveExpert), data,
        config, stream + 100, stage_log);
  }
  return model;
}

namespace
{

GateDecision threshold_rule(std::size_t neighbors, const MetaFeatureVector & f)
{
  int chosen = kCurvatureExpert;
  if (f.geo(GeoSlot::EgoSpeedLast) < 3.0 && neighbors == 0) {
    chosen = kPhysicsExpert;
  } else if (f.geo(GeoSlot::MinNeighborDist) < 10.0) {
    chosen = kInteractiveExpert;
  }
  GateDecision d;
  d.scores = {0.0, 0.0, 0.0};
  d.scores[static_cast<std::size_t>(chosen)] = 1.0;
  d.chosen = chosen;
  d.confidence = 1.0;
  return d;
}

}  // namespace

GateDecision threshold_gate(const Scene & scene, const MetaFeatureVector & features)
{
  return threshold_rule(scene.neighbor_histories.size(), features);
}

StageOneResult stage_one_decide(const GateModel & model, const MetaFeatureVector & raw)
{
  if (!model.stage_one) {
    throw ContractError("model has no stage-one head");
  }
  const auto s = head_outputs(*model.stage_one, raw);
  const auto p = softmax(s);
  const int cheap = s[kPhysicsExpert] >= s[kCurvatureExpert] ? kPhysicsExpert : kCurvatureExpert;
  StageOneResult r;
  r.decision.scores = s;
  r.decision.chosen = cheap;
  r.decision.confidence = p[static_cast<std::size_t>(cheap)];
  r.commit = model.confidence_threshold < 1.0 && r.decision.confidence >= model.confidence_threshold;
  return r;
}

GateDecision decide(const GateModel & model, const MetaFeatureVector & raw)
{
  switch (model.strategy) {
    case Strategy::Thresholding:
      return threshold_rule(static_cast<std::size_t>(raw.geo(GeoSlot::NeighborCount)), raw);
    case Strategy::TwoStage: {
        const auto s1 = stage_one_decide(model, raw);
        if (s1.commit) {
          return s1.decision;
        }
        return decision_from_scores(forward(model, raw));
      }
    default:
      return decision_from_scores(forward(model, raw));
  }
}

TwoStageOutcome two_stage_decide(
  const GateModel & model, const Scene & scene, const ExpertPool & pool, std::uint64_t seed,
  const FeatureOptions & options)
{
  if (model.strategy != Strategy::TwoStage || !model.stage_one) {
    throw ContractError("two_stage_decide needs a two-stage model");
  }
  if (pool.size() != static_cast<std::size_t>(kNumExperts)) {
    throw ContractError("two_stage_decide needs the full three-expert pool");
  }
  TwoStageOutcome out;
  out.analysis = analyze_scene(scene, pool, seed, options, {true, false, true});
  out.cost_spent = pool[kPhysicsExpert].id().cost_weight + pool[kCurvatureExpert].id().cost_weight;
  const auto s1 = stage_one_decide(model, out.analysis.features);
  if (s1.commit) {
    out.decision = s1.decision;
    return out;
  }
  const auto expensive = analyze_scene(scene, pool, seed, options, {false, true, false});
  for (std::size_t s = 0; s < kSlotsPerExpert; ++s) {
    const auto i = slot_index(kInteractiveExpert, static_cast<DiagSlot>(s));
    out.analysis.features[i] = expensive.features[i];
  }
  out.analysis.predictions[kInteractiveExpert] = expensive.predictions[kInteractiveExpert];
  out.cost_spent += pool[kInteractiveExpert].id().cost_weight;
  out.escalated = true;
  out.decision = decision_from_scores(forward(model, out.analysis.features));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace
{

using nlohmann::json;

json head_to_json(const GateHead & h)
{
  json j;
  j["dims"] = h.mlp.dims();
  j["weights"] = h.mlp.flatten();
  j["normalizer"] = {{"mean", h.normalizer.mean}, {"std", h.normalizer.std}};
  j["mask"] = h.mask;
  return j;
}

GateHead head_from_json(const json & j)
{
  GateHead h;
  const auto dims = j.at("dims").get<std::vector<int>>();
  if (dims != kGateLayerDims) {
    std::string got;
    for (int d : dims) {
      got += (got.empty() ? "" : "-") + std::to_string(d);
    }
    throw DataError("checkpoint network is " + got + ", expected 36-64-32-3");
  }
  h.mlp = Mlp::zeros(dims);
  h.mlp.unflatten(j.at("weights").get<std::vector<double>>());
  const auto mean = j.at("normalizer").at("mean").get<std::vector<double>>();
  const auto sd = j.at("normalizer").at("std").get<std::vector<double>>();
  const auto mask = j.at("mask").get<std::vector<bool>>();
  if (mean.size() != kFeatureDim || sd.size() != kFeatureDim || mask.size() != kFeatureDim) {
    throw DataError("checkpoint normalizer or mask is not 36 wide");
  }
  std::copy(mean.begin(), mean.end(), h.normalizer.mean.begin());
  std::copy(sd.begin(), sd.end(), h.normalizer.std.begin());
  std::copy(mask.begin(), mask.end(), h.mask.begin());
  return h;
}

}  // namespace

std::string checkpoint_to_json(const GateModel & model)
{
  json j;
  j["format"] = "gatekit-gate";
  j["version"] = 1;
  j["strategy"] = std::string(to_string(model.strategy));
  j["confidence_threshold"] = model.confidence_threshold;
  j["seed"] = model.seed;
  j["epochs"] = model.epochs;
  j["preset"] = model.preset;
  if (model.strategy != Strategy::Thresholding) {
    j["head"] = head_to_json(model.head);
  }
  if (model.stage_one) {
    j["stage_one"] = head_to_json(*model.stage_one);
  }
  j["log"] = {{"train_loss", model.log.train_loss}, {"val_fde", model.log.val_fde},
    {"val_orr", model.log.val_orr}, {"val_accuracy", model.log.val_accuracy},
    {"best_epoch", model.log.best_epoch}};
  return j.dump(1);
}

GateModel checkpoint_from_json(const std::string & text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception & e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "gatekit-gate") {
      throw DataError("not a gatekit gate checkpoint");
    }
    GateModel m;
    m.strategy = parse_strategy(j.at("strategy").get<std::string>());
    m.confidence_threshold = j.at("confidence_threshold").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epochs = j.at("epochs").get<int>();
    m.preset = j.at("preset").get<std::string>();
    if (m.strategy != Strategy::Thresholding) {
      m.head = head_from_json(j.at("head"));
    }
    if (j.contains("stage_one")) {
      m.stage_one = head_from_json(j.at("stage_one"));
    }
    if (j.contains("log")) {
      const auto & l = j.at("log");
      m.log.train_loss = l.at("train_loss").get<std::vector<double>>();
      m.log.val_fde = l.at("val_fde").get<std::vector<double>>();
      m.log.val_orr = l.at("val_orr").get<std::vector<double>>();
      m.log.val_accuracy = l.at("val_accuracy").get<std::vector<double>>();
      m.log.best_epoch = l.at("best_epoch").get<int>();
    }
    m.validate();
    return m;
  } catch (const json::exception & e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ContractError & e) {
    throw DataError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const GateModel & model, const std::string & path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write checkpoint " + path);
  }
  out << checkpoint_to_json(model) << '\n';
}

GateModel load_checkpoint(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read checkpoint " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace gatekit
