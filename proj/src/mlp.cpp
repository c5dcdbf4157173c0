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

#include "gatekit/mlp.hpp"

#include <cmath>
#include <string>

#include "gatekit/core.hpp"
#include "gatekit/random.hpp"

namespace gatekit
{

namespace
{

void check_dims(const std::vector<int> & dims)
{
  if (dims.size() < 2) {
    throw ContractError("an MLP needs at least input and output widths");
  }
  for (int d : dims) {
    if (d < 1) {
      throw ContractError("MLP layer widths must be positive");
    }
  }
}

}  // namespace

Mlp::Mlp(const std::vector<int> & dims, std::uint64_t seed)
: Mlp(zeros(dims))
{
  Rng rng(derive_seed(seed, 0x6d6c70));
  for (auto & layer : layers_) {
    const double sd = std::sqrt(2.0 / static_cast<double>(layer.weight.cols()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = gaussian(rng, sd);
      }
    }
  }
}

Mlp Mlp::zeros(const std::vector<int> & dims)
{
  check_dims(dims);
  Mlp m;
  m.dims_ = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    m.layers_.push_back({Eigen::MatrixXd::Zero(dims[l + 1], dims[l]),
        Eigen::VectorXd::Zero(dims[l + 1])});
  }
  return m;
}

std::size_t Mlp::parameter_count() const
{
  std::size_t n = 0;
  for (const auto & l : layers_) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd & x) const
{
  Cache unused;
  return forward(x, unused);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd & x, Cache & cache) const
{
  if (x.cols() != input_dim()) {
    throw ContractError("MLP input has " + std::to_string(x.cols()) + " columns, expected " +
      std::to_string(input_dim()));
  }
  cache.inputs.clear();
  cache.pre.clear();
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cache.inputs.push_back(h);
    Eigen::MatrixXd z = h * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    cache.pre.push_back(z);
    h = l + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

Eigen::VectorXd Mlp::forward_one(const Eigen::VectorXd & x) const
{
  return forward(x.transpose()).row(0).transpose();
}

std::vector<DenseLayer> Mlp::backward(const Cache & cache, const Eigen::MatrixXd & grad_out) const
{
  std::vector<DenseLayer> grads(layers_.size());
  Eigen::MatrixXd g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0; ) {
    if (i + 1 < layers_.size()) {
      g = g.cwiseProduct((cache.pre[i].array() > 0.0).cast<double>().matrix());
    }
    grads[i].weight = g.transpose() * cache.inputs[i];
    grads[i].bias = g.colwise().sum().transpose();
    if (i > 0) {
      g = g * layers_[i].weight;
    }
  }
  return grads;
}

std::vector<double> Mlp::flatten() const
{
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto & l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        out.push_back(l.weight(r, c));
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      out.push_back(l.bias(r));
    }
  }
  return out;
}

void Mlp::unflatten(const std::vector<double> & values)
{
  if (values.size() != parameter_count()) {
    throw ContractError("expected " + std::to_string(parameter_count()) + " parameters, got " +
      std::to_string(values.size()));
  }
  std::size_t k = 0;
  for (auto & l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        l.weight(r, c) = values[k++];
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      l.bias(r) = values[k++];
    }
  }
}

double Mlp::lipschitz_bound() const
{
  double bound = 1.0;
  for (const auto & l : layers_) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(l.weight);
    bound *= svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  }
  return bound;
}

Adam::Adam(const Mlp & model, AdamConfig config)
: config_(config)
{
  for (const auto & l : model.layers()) {
    m_.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
        Eigen::VectorXd::Zero(l.bias.size())});
  }
  v_ = m_;
}

void Adam::step(Mlp & model, const std::vector<DenseLayer> & grads)
{
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  auto & layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    m_[i].weight = b1 * m_[i].weight + (1.0 - b1) * grads[i].weight;
    m_[i].bias = b1 * m_[i].bias + (1.0 - b1) * grads[i].bias;
    v_[i].weight = b2 * v_[i].weight + (1.0 - b2) * grads[i].weight.cwiseAbs2();
    v_[i].bias = b2 * v_[i].bias + (1.0 - b2) * grads[i].bias.cwiseAbs2();
    layers[i].weight.array() -= lr * (m_[i].weight.array() / c1) /
      ((v_[i].weight.array() / c2).sqrt() + eps);
    layers[i].bias.array() -= lr * (m_[i].bias.array() / c1) /
      ((v_[i].bias.array() / c2).sqrt() + eps);
  }
}

}  // namespace gatekit
