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

#ifndef GATEKIT__MLP_HPP_
#define GATEKIT__MLP_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace gatekit
{

/// Fully connected layer, y = W x + b with W of shape (out, in).
struct DenseLayer
{
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  friend bool operator==(const DenseLayer & a, const DenseLayer & b)
  {
    return a.weight == b.weight && a.bias == b.bias;
  }
};

/// ReLU between layers, identity on the output.
class Mlp
{
public:
  Mlp() = default;
  /// He-initialised from a seeded stream; biases start at zero.
  Mlp(const std::vector<int> & dims, std::uint64_t seed);
  /// All parameters zero.
  static Mlp zeros(const std::vector<int> & dims);

  const std::vector<int> & dims() const { return dims_; }
  std::vector<DenseLayer> & layers() { return layers_; }
  const std::vector<DenseLayer> & layers() const { return layers_; }
  int input_dim() const { return dims_.empty() ? 0 : dims_.front(); }
  int output_dim() const { return dims_.empty() ? 0 : dims_.back(); }
  std::size_t parameter_count() const;

  struct Cache
  {
    /// inputs[l] is the (batch, in) matrix fed to layer l; pre[l] its pre-activation.
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre;
  };

  /// Rows are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd & x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd & x, Cache & cache) const;
  Eigen::VectorXd forward_one(const Eigen::VectorXd & x) const;

  /// Parameter gradients given dL/d(output) for the cached batch.
  std::vector<DenseLayer> backward(const Cache & cache, const Eigen::MatrixXd & grad_out) const;

  /// Row-major weights then bias, layer by layer.
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double> & values);

  /// Product of per-layer spectral norms; a Lipschitz bound for the map.
  double lipschitz_bound() const;

  friend bool operator==(const Mlp & a, const Mlp & b)
  {
    return a.dims_ == b.dims_ && a.layers_ == b.layers_;
  }

private:
  std::vector<int> dims_;
  std::vector<DenseLayer> layers_;
};

struct AdamConfig
{
  double learning_rate{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
};

class Adam
{
public:
  Adam(const Mlp & model, AdamConfig config);
  void step(Mlp & model, const std::vector<DenseLayer> & grads);

private:
  AdamConfig config_;
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
  long t_{0};
};

}  // namespace gatekit

#endif  // GATEKIT__MLP_HPP_
