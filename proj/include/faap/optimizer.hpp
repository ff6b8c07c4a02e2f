/*
 * Copyright 2026 The FAAP Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <vector>

#include "faap/network.hpp"

namespace faap {

enum class OptimizerKind { kAdam, kSgd };

/// First-order optimizer over a network's parameter list. kSgd is the plain
/// `theta -= lr * grad` step; kAdam adds bias-corrected moment estimates.
template <typename Scalar>
class Optimizer {
 public:
  Optimizer(const Network<Scalar>& net, double learning_rate,
            OptimizerKind kind = OptimizerKind::kAdam, double beta1 = 0.9, double beta2 = 0.999,
            double epsilon = 1e-8)
      : kind_(kind), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    first_ = net.zero_gradients();
    second_ = net.zero_gradients();
  }

  void step(Network<Scalar>& net, const Gradients<Scalar>& grads) {
    auto params = net.parameters();
    if (kind_ == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= Scalar(lr_) * grads[i];
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const Scalar step = Scalar(lr_ * std::sqrt(c2) / c1);
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i] = Scalar(beta1_) * first_[i] + Scalar(1 - beta1_) * grads[i];
      second_[i] = Scalar(beta2_) * second_[i] + Scalar(1 - beta2_) * grads[i].cwiseAbs2();
      params[i]->array() -=
          step * first_[i].array() / (second_[i].array().sqrt() + Scalar(eps_));
    }
  }

  long steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  Gradients<Scalar> first_;
  Gradients<Scalar> second_;
};

}  // namespace faap
