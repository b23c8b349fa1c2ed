#pragma once

#include <vector>

#include "infomtl/data.hpp"
#include "infomtl/losses.hpp"
#include "infomtl/model.hpp"

namespace infomtl {

struct ObjectiveConfig {
  Method mode = Method::ew;
  double alpha = 0.0;  // contrastive term weight
  double beta = 0.0;   // KL term weight
  double tau = 1.0;    // contrastive temperature
  std::vector<double> task_weights;  // lambda_t, consumed by weighting modes

  void validate() const;
  // zeroes the terms the mode forces off: simax_only drops beta, timin_only
  // drops alpha, ew and the weighting baselines drop both
  ObjectiveConfig normalized() const;
};

struct LossBreakdown {
  Tensor total;  // scalar, on the tape
  double ce = 0.0;
  double infonce = 0.0;
  double kl = 0.0;
  std::vector<double> per_task_ce;
  std::vector<int> per_task_count;
};

// Per-task pieces kept as live tape scalars so the weighting baselines can
// compose them into their own objectives.
struct TaskLossSet {
  Tensor z;                     // anchor-pass shared representations {B, dz}
  std::vector<Tensor> task_ce;  // scalar mean CE per task (undefined if absent)
  std::vector<int> counts;
  Tensor mean_ce;               // example-weighted mean CE over the batch
  Tensor kl;                    // batch-mean KL; defined on the stochastic path
};

// Deterministic-head path: per-task CE through the affine heads.
TaskLossSet per_task_ce_losses(const MultiTaskBatch& batch,
                               const ModelState& model, RngStream& dropout_rng,
                               bool train);

// Stochastic-head path: one reparameterized sample per example; CE on the
// sampled output representation, KL against the N(0, I) prior.
TaskLossSet per_task_stochastic_losses(const MultiTaskBatch& batch,
                                       const ModelState& model,
                                       RngStream& dropout_rng,
                                       RngStream& sample_rng, bool train);

LossBreakdown ew_loss(const MultiTaskBatch& batch, const ModelState& model,
                      RngStream& dropout_rng);
LossBreakdown simax_loss(const MultiTaskBatch& batch, const ModelState& model,
                         const ObjectiveConfig& config, RngStream& dropout_rng);
LossBreakdown timin_loss(const MultiTaskBatch& batch, const ModelState& model,
                         const ObjectiveConfig& config, RngStream& dropout_rng,
                         RngStream& sample_rng);
LossBreakdown infomtl_loss(const MultiTaskBatch& batch, const ModelState& model,
                           const ObjectiveConfig& config,
                           RngStream& dropout_rng, RngStream& sample_rng);

// Dispatch over the four objective modes (weighting baselines are composed
// by the trainer from per_task_ce_losses + the weighting module).
LossBreakdown objective_loss(const MultiTaskBatch& batch,
                             const ModelState& model,
                             const ObjectiveConfig& config,
                             RngStream& dropout_rng, RngStream& sample_rng);

// Eval-mode predictions for one task: no dropout, stochastic heads at the
// posterior mean.
std::vector<int> predict_labels(const ModelState& model, const Tensor& x,
                                int task);

}  // namespace infomtl
