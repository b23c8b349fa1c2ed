#pragma once

#include <string>
#include <utility>
#include <vector>

#include "infomtl/method.hpp"
#include "infomtl/rng.hpp"
#include "infomtl/tensor.hpp"

namespace infomtl {

inline constexpr double kLossGuardEps = 1e-8;

// ---- weight emitters ----
std::vector<double> weights_ew(int num_tasks);                      // 1/T each
std::vector<double> weights_tw(const std::vector<int64_t>& counts); // n_t/sum
// w_t = l_t(e-1)/l_t(e-2); lambda = T * softmax(w / temperature)
std::vector<double> weights_dwa(const std::vector<double>& prev_losses,
                                const std::vector<double>& prev2_losses,
                                double temperature);
std::vector<double> weights_rlw(int num_tasks, RngStream& rng);  // softmax(N(0,1))

// ---- composite losses over live per-task loss scalars ----
Tensor weighted_sum(const std::vector<Tensor>& task_losses,
                    const std::vector<double>& weights);
Tensor loss_si(const std::vector<Tensor>& task_losses);   // sum log(l + eps)
Tensor loss_gls(const std::vector<Tensor>& task_losses);  // exp(mean log l)
// sum_t exp(-s_t) l_t + s_t, s_t learned jointly
Tensor loss_uw(const std::vector<Tensor>& task_losses,
               const std::vector<Tensor>& s);
// sum_t exp(s_t) l_t - s_t, s_t learned jointly
Tensor loss_imtl_l(const std::vector<Tensor>& task_losses,
                   const std::vector<Tensor>& s);

// ---- gradient surgery ----
// For each task i, iterate the other tasks j in rng-shuffled order; when
// g_i . g_j < 0, project: g_i <- g_i - (g_i.g_j / ||g_j||^2) g_j. A zero-norm
// g_j is skipped (counted in *skipped_zero_norm when given).
std::vector<std::vector<double>> pcgrad_project(
    const std::vector<std::vector<double>>& grads, RngStream& rng,
    int* skipped_zero_norm = nullptr);
std::vector<double> pcgrad_combine(const std::vector<std::vector<double>>& grads,
                                   RngStream& rng,
                                   int* skipped_zero_norm = nullptr);

// Per-run state for the weighting method: learnable scalars (UW/IMTL-L), the
// two-epoch loss history ring (DWA), train counts (TW), and the RLW stream.
class TaskWeightState {
 public:
  static TaskWeightState create(Method method, int num_tasks,
                                const std::vector<int64_t>& train_counts,
                                RngStream rlw_rng, double dwa_temperature = 2.0);

  Method method() const { return method_; }

  // Builds this method's combined loss from live per-task CE scalars.
  // Not valid for pcgrad (which needs per-task backward passes instead).
  Tensor combine(const std::vector<Tensor>& task_losses);

  // Current iteration's weights (tw fixed, dwa per epoch, rlw fresh draws).
  std::vector<double> current_weights();

  // DWA epoch hook: push per-task mean train losses, refresh weights.
  void end_epoch(const std::vector<double>& per_task_mean_loss);

  // learnable scalars to register with the optimizer / checkpoints
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

 private:
  Method method_ = Method::ew;
  int num_tasks_ = 0;
  std::vector<Tensor> learnable_;
  std::vector<int64_t> train_counts_;
  double dwa_temperature_ = 2.0;
  std::vector<std::vector<double>> history_;  // most recent first, depth 2
  std::vector<double> dwa_weights_;
  RngStream rlw_rng_{0};
};

}  // namespace infomtl
