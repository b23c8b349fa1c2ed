#pragma once

#include <functional>
#include <string>
#include <vector>

#include "infomtl/data.hpp"
#include "infomtl/model.hpp"

namespace infomtl {

enum class PerturbKind { gaussian, fgm };

std::string perturb_kind_name(PerturbKind k);
PerturbKind perturb_kind_from_name(const std::string& name);

struct PerturbSpec {
  PerturbKind kind = PerturbKind::gaussian;
  std::vector<double> epsilons = {0.0, 0.1, 0.5, 1.0, 2.0, 5.0};
  uint64_t seed = 0;

  void validate() const;  // eps >= 0, grid must contain the eps=0 anchor
};

// x~ = x + eps * delta/||delta||_2 per example, delta ~ N(0, I).
Tensor perturb_gaussian(const Tensor& x, double eps, RngStream& rng);

struct FgmResult {
  Tensor x_tilde;
  int zero_grad_rows = 0;  // rows returned unperturbed
};

// Single-step gradient perturbation: g_i = d loss_i / d x_i with each
// example's own task cross-entropy (stochastic heads at the mean), then
// x~_i = x_i + eps * g_i/||g_i||_2. Model parameters are left bitwise
// unchanged. `labels` holds each row's gold label for `task`.
FgmResult perturb_fgm(const Tensor& x, const std::vector<int>& labels,
                      int task, const ModelState& model, double eps);

// Generic variant: `loss_fn` maps the grad-enabled input leaf to a scalar
// that is a sum of per-example terms.
FgmResult fgm_with_loss(const Tensor& x,
                        const std::function<Tensor(const Tensor&)>& loss_fn,
                        double eps);

struct RobustReport {
  PerturbKind kind;
  std::vector<double> epsilons;
  std::vector<std::string> task_names;
  std::vector<std::vector<double>> scores;  // [task][eps index], percent

  double avg_at(size_t eps_index) const;
  // long format: method,kind,task,epsilon,score
  std::string to_csv(const std::string& method) const;
};

// For each task and strength: perturb the task's full test split, predict in
// eval mode, score with the task's metric. The eps=0 row is the clean run.
RobustReport robust_evaluate(const ModelState& model,
                             const MultiTaskDataset& ds,
                             const PerturbSpec& spec);

}  // namespace infomtl
