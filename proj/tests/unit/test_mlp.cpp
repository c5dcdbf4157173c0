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

#include "gatekit/gates.hpp"
#include "gatekit/mlp.hpp"
#include "gatekit/random.hpp"

namespace gatekit
{
namespace
{

Eigen::MatrixXd random_batch(Rng & rng, int rows, int cols)
{
  Eigen::MatrixXd x(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      x(r, c) = gaussian(rng, 1.0);
    }
  }
  return x;
}

/// Summed pairwise ranking loss of a batch and its gradient w.r.t. the scores.
double batch_ranking_loss(
  const Eigen::MatrixXd & scores, const std::vector<ExpertScores> & fde, Eigen::MatrixXd * grad)
{
  double total = 0.0;
  if (grad) {
    *grad = Eigen::MatrixXd::Zero(scores.rows(), scores.cols());
  }
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    for (const auto & p : build_pairs(fde[static_cast<std::size_t>(r)], 0.01)) {
      const auto l = ranking_loss(scores(r, p.i), scores(r, p.j), p.i_better);
      total += l.loss;
      if (grad) {
        (*grad)(r, p.i) += l.d_si;
        (*grad)(r, p.j) += l.d_sj;
      }
    }
  }
  return total;
}

TEST(Mlp, ShapesAndParameterCount)
{
  const Mlp m(kGateLayerDims, 1);
  ASSERT_EQ(m.layers().size(), 3u);
  EXPECT_EQ(m.layers()[0].weight.rows(), 64);
  EXPECT_EQ(m.layers()[0].weight.cols(), 36);
  EXPECT_EQ(m.parameter_count(), 36u * 64 + 64 + 64 * 32 + 32 + 32 * 3 + 3);
  EXPECT_EQ(m.flatten().size(), m.parameter_count());
}

TEST(Mlp, SeededInitialisation)
{
  EXPECT_EQ(Mlp(kGateLayerDims, 5), Mlp(kGateLayerDims, 5));
  EXPECT_FALSE(Mlp(kGateLayerDims, 5) == Mlp(kGateLayerDims, 6));
  const Mlp m(kGateLayerDims, 5);
  for (const auto & l : m.layers()) {
    EXPECT_EQ(l.bias.squaredNorm(), 0.0);
  }
}

TEST(Mlp, ZeroNetworkOutputsZero)
{
  Rng rng(1);
  const auto out = Mlp::zeros(kGateLayerDims).forward(random_batch(rng, 4, 36));
  EXPECT_EQ(out.squaredNorm(), 0.0);
}

TEST(Mlp, FlattenRoundTrip)
{
  const Mlp a(kGateLayerDims, 3);
  Mlp b = Mlp::zeros(kGateLayerDims);
  b.unflatten(a.flatten());
  EXPECT_EQ(a, b);
  EXPECT_THROW(b.unflatten(std::vector<double>(3, 0.0)), ContractError);
}

TEST(Mlp, ForwardOneMatchesBatchRow)
{
  Rng rng(2);
  const Mlp m(kGateLayerDims, 9);
  const auto x = random_batch(rng, 3, 36);
  const auto batch = m.forward(x);
  for (int r = 0; r < 3; ++r) {
    const Eigen::VectorXd row = x.row(r).transpose();
    EXPECT_LT((m.forward_one(row) - batch.row(r).transpose()).norm(), 1e-12);
  }
}

TEST(Mlp, EndToEndGradientMatchesFiniteDifferences)
{
  Rng rng(42);
  Mlp m(kGateLayerDims, 42);
  // Nonzero biases so every layer's bias gradient is exercised.
  auto theta = m.flatten();
  for (auto & v : theta) {
    v += gaussian(rng, 0.05);
  }
  m.unflatten(theta);
  const auto x = random_batch(rng, 5, 36);
  std::vector<ExpertScores> fde;
  for (int r = 0; r < 5; ++r) {
    fde.push_back({uniform(rng, 0, 5), uniform(rng, 0, 5), uniform(rng, 0, 5)});
  }

  Mlp::Cache cache;
  Eigen::MatrixXd grad_out;
  batch_ranking_loss(m.forward(x, cache), fde, &grad_out);
  Mlp shape = m;
  shape.layers() = m.backward(cache, grad_out);
  const auto analytic = shape.flatten();

  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t p = 0; p < theta.size(); ++p) {
    auto plus = theta;
    auto minus = theta;
    plus[p] += h;
    minus[p] -= h;
    Mlp mp = m;
    Mlp mm = m;
    mp.unflatten(plus);
    mm.unflatten(minus);
    const double numeric =
      (batch_ranking_loss(mp.forward(x), fde, nullptr) -
      batch_ranking_loss(mm.forward(x), fde, nullptr)) / (2.0 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[p]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[p]) / scale);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Mlp, LipschitzBoundHolds)
{
  Rng rng(8);
  const Mlp m(kGateLayerDims, 8);
  const double bound = m.lipschitz_bound();
  EXPECT_GT(bound, 0.0);
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd x = random_batch(rng, 1, 36).row(0).transpose();
    Eigen::VectorXd d = random_batch(rng, 1, 36).row(0).transpose() * uniform(rng, 1e-4, 1.0);
    const double change = (m.forward_one(x + d) - m.forward_one(x)).norm();
    EXPECT_LE(change, bound * d.norm() * (1.0 + 1e-9));
  }
}

TEST(Adam, ReducesAQuadraticLoss)
{
  Rng rng(4);
  Mlp m({2, 8, 1}, 4);
  const auto x = random_batch(rng, 32, 2);
  Eigen::MatrixXd y(32, 1);
  for (int r = 0; r < 32; ++r) {
    y(r, 0) = 0.5 * x(r, 0) - x(r, 1);
  }
  const auto loss = [&](const Mlp & net) {return 0.5 * (net.forward(x) - y).squaredNorm();};
  const double before = loss(m);
  Adam opt(m, AdamConfig{});
  for (int it = 0; it < 300; ++it) {
    Mlp::Cache cache;
    const auto out = m.forward(x, cache);
    opt.step(m, m.backward(cache, out - y));
  }
  EXPECT_LT(loss(m), 0.1 * before);
}

}  // namespace
}  // namespace gatekit
