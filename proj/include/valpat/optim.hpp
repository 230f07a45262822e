#pragma once

#include <vector>

#include "valpat/common.hpp"
#include "valpat/nn.hpp"

namespace valpat {

/// Adaptive-moment optimizer with decoupled weight decay. Decay is skipped
/// for parameters flagged decay=false (biases, norm parameters, the ITC
/// temperature). Moment slots are positional: every step must pass the same
/// parameter list the optimizer was attached with.
class AdamW {
 public:
  struct Hyper {
    Scalar beta1{0.9};
    Scalar beta2{0.999};
    Scalar eps{1e-8};
  };

  void attach(const nn::ParamList& params) { attach(params, Hyper()); }
  void attach(const nn::ParamList& params, Hyper hyper);

  /// One update over all parameters from their current grads.
  void step(const nn::ParamList& params, Scalar lr, Scalar weight_decay);

  std::uint64_t steps_taken() const { return t_; }

  /// Checkpoint access; slot order matches the attached parameter order.
  const std::vector<Matrix>& moment1() const { return m_; }
  const std::vector<Matrix>& moment2() const { return v_; }
  void restore(std::vector<Matrix> m, std::vector<Matrix> v, std::uint64_t t);

 private:
  Hyper hyper_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t t_{0};
};

}  // namespace valpat
