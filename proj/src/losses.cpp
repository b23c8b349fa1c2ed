#include "infomtl/losses.hpp"

#include <numeric>

#include "infomtl/common.hpp"

namespace infomtl {

Tensor per_example_ce(const Tensor& logits, const std::vector<int>& labels) {
  IMTL_CHECK(logits.shape().size() == 2, "cross_entropy: logits must be 2-D");
  IMTL_CHECK(static_cast<size_t>(logits.rows()) == labels.size(),
             "cross_entropy: one label per row required");
  int classes = logits.cols();
  for (size_t i = 0; i < labels.size(); ++i) {
    IMTL_CHECK(labels[i] >= 0 && labels[i] < classes,
               "cross_entropy: label " + std::to_string(labels[i]) +
                   " out of range [0," + std::to_string(classes) +
                   ") at row " + std::to_string(i));
  }
  return neg(row_gather(log_softmax_rows(logits), labels));
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  return mean_all(per_example_ce(logits, labels));
}

Tensor infonce(const Tensor& z, const Tensor& zpos, double tau) {
  IMTL_CHECK(z.shape().size() == 2 && zpos.shape().size() == 2 &&
                 z.rows() == zpos.rows() && z.cols() == zpos.cols(),
             "infonce: z and z+ must share shape");
  IMTL_CHECK(z.rows() >= 2, "infonce: batch must contain at least 2 anchors");
  IMTL_CHECK(tau > 0.0, "infonce: temperature must be positive");
  Tensor sims = cosine_similarity_matrix(z, zpos);  // rejects zero-norm rows
  std::vector<int> diag(static_cast<size_t>(z.rows()));
  std::iota(diag.begin(), diag.end(), 0);
  return cross_entropy(scale(sims, 1.0 / tau), diag);
}

Tensor kl_diag_gaussian(const Tensor& mu, const Tensor& logvar) {
  IMTL_CHECK(mu.shape().size() == 2 && mu.shape() == logvar.shape(),
             "kl_diag_gaussian: mu and logvar must be 2-D with equal shape");
  // -1/2 (1 + logvar - mu^2 - exp(logvar)) per coordinate
  Tensor term = scale(
      add_scalar(sub(logvar, add(mul(mu, mu), exp_op(logvar))), 1.0), -0.5);
  return scale(sum_all(term), 1.0 / static_cast<double>(mu.rows()));
}

}  // namespace infomtl
