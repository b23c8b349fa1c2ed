#pragma once

#include <vector>

#include "infomtl/tensor.hpp"

namespace infomtl {

struct AdamaxConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamaxState {
  int64_t step = 0;
  AdamaxConfig config;
  std::vector<std::vector<double>> m;  // first-moment EMA per parameter
  std::vector<std::vector<double>> u;  // infinity-norm accumulator per parameter
};

// One Adamax update:
//   m <- b1 m + (1-b1) g,  u <- max(b2 u, |g|),
//   p <- p - lr / (1 - b1^t) * m / (u + eps).
// Throws NumericError on a non-finite gradient.
void adamax_step(AdamaxState& state, std::vector<Tensor>& params,
                 const std::vector<std::vector<double>>& grads);

// Convenience wrapper owning the state and reading grads off the tensors.
class Adamax {
 public:
  Adamax(std::vector<Tensor> params, AdamaxConfig config);

  void step();       // consumes the .grad() of each parameter
  void zero_grad();
  const AdamaxState& state() const { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamaxState state_;
};

}  // namespace infomtl
