#pragma once

#include <vector>

#include "infomtl/tensor.hpp"

namespace infomtl {

// Per-example negative log-likelihood column {B,1}; labels must lie in [0,C).
Tensor per_example_ce(const Tensor& logits, const std::vector<int>& labels);

// Batch-mean cross-entropy via stable log-softmax.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Contrastive loss over a batch of anchors z and their positive keys zpos:
// mean_i -log exp(cos(z_i,zpos_i)/tau) / sum_j exp(cos(z_i,zpos_j)/tau).
// The key pool is exactly the batch's positive keys (own positive included
// in the denominator). Requires B >= 2 and no zero-norm rows.
Tensor infonce(const Tensor& z, const Tensor& zpos, double tau);

// KL(N(mu, diag(exp(logvar))) || N(0, I)) summed over coordinates, averaged
// over the batch: mean_i sum_c -1/2 (1 + logvar - mu^2 - exp(logvar)).
Tensor kl_diag_gaussian(const Tensor& mu, const Tensor& logvar);

}  // namespace infomtl
