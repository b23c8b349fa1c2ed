#include "infomtl/weighting.hpp"

#include <algorithm>
#include <cmath>

#include "infomtl/common.hpp"

namespace infomtl {

namespace {

std::vector<double> softmax_vec(const std::vector<double>& v) {
  double m = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

void check_defined(const std::vector<Tensor>& losses, const char* who) {
  IMTL_CHECK(!losses.empty(), std::string(who) + ": no task losses");
  for (const auto& l : losses) {
    IMTL_CHECK(l.defined() && l.size() == 1,
               std::string(who) + ": task losses must be defined scalars");
  }
}

}  // namespace

std::vector<double> weights_ew(int num_tasks) {
  IMTL_CHECK(num_tasks >= 1, "weights_ew: need at least one task");
  return std::vector<double>(static_cast<size_t>(num_tasks),
                             1.0 / static_cast<double>(num_tasks));
}

std::vector<double> weights_tw(const std::vector<int64_t>& counts) {
  IMTL_CHECK(!counts.empty(), "weights_tw: no tasks");
  int64_t total = 0;
  for (int64_t c : counts) {
    IMTL_CHECK(c > 0, "weights_tw: counts must be positive");
    total += c;
  }
  IMTL_CHECK(total > 0, "weights_tw: zero total count");
  std::vector<double> out;
  out.reserve(counts.size());
  for (int64_t c : counts)
    out.push_back(static_cast<double>(c) / static_cast<double>(total));
  return out;
}

std::vector<double> weights_dwa(const std::vector<double>& prev_losses,
                                const std::vector<double>& prev2_losses,
                                double temperature) {
  IMTL_CHECK(prev_losses.size() == prev2_losses.size() && !prev_losses.empty(),
             "weights_dwa: history shapes differ");
  IMTL_CHECK(temperature > 0.0, "weights_dwa: temperature must be positive");
  size_t T = prev_losses.size();
  std::vector<double> w(T);
  for (size_t t = 0; t < T; ++t) {
    double denom = std::max(prev2_losses[t], kLossGuardEps);
    w[t] = prev_losses[t] / denom / temperature;
  }
  std::vector<double> sm = softmax_vec(w);
  for (double& x : sm) x *= static_cast<double>(T);
  return sm;
}

std::vector<double> weights_rlw(int num_tasks, RngStream& rng) {
  IMTL_CHECK(num_tasks >= 1, "weights_rlw: need at least one task");
  std::vector<double> g(static_cast<size_t>(num_tasks));
  for (double& x : g) x = rng.normal();
  return softmax_vec(g);
}

Tensor weighted_sum(const std::vector<Tensor>& task_losses,
                    const std::vector<double>& weights) {
  check_defined(task_losses, "weighted_sum");
  IMTL_CHECK(task_losses.size() == weights.size(),
             "weighted_sum: weight count mismatch");
  Tensor acc;
  for (size_t t = 0; t < task_losses.size(); ++t) {
    Tensor term = scale(task_losses[t], weights[t]);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

Tensor loss_si(const std::vector<Tensor>& task_losses) {
  check_defined(task_losses, "loss_si");
  Tensor acc;
  for (const auto& l : task_losses) {
    IMTL_CHECK_NUM(l.item() > -kLossGuardEps,
                   "loss_si: task loss below -eps");
    Tensor term = log_op(add_scalar(l, kLossGuardEps));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

Tensor loss_gls(const std::vector<Tensor>& task_losses) {
  check_defined(task_losses, "loss_gls");
  Tensor acc;
  for (const auto& l : task_losses) {
    IMTL_CHECK_NUM(l.item() > 0.0, "loss_gls: non-positive task loss");
    Tensor term = log_op(l);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return exp_op(scale(acc, 1.0 / static_cast<double>(task_losses.size())));
}

Tensor loss_uw(const std::vector<Tensor>& task_losses,
               const std::vector<Tensor>& s) {
  check_defined(task_losses, "loss_uw");
  IMTL_CHECK(task_losses.size() == s.size(), "loss_uw: one s_t per task");
  Tensor acc;
  for (size_t t = 0; t < task_losses.size(); ++t) {
    Tensor term = add(mul(exp_op(neg(s[t])), task_losses[t]), s[t]);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

Tensor loss_imtl_l(const std::vector<Tensor>& task_losses,
                   const std::vector<Tensor>& s) {
  check_defined(task_losses, "loss_imtl_l");
  IMTL_CHECK(task_losses.size() == s.size(), "loss_imtl_l: one s_t per task");
  Tensor acc;
  for (size_t t = 0; t < task_losses.size(); ++t) {
    Tensor term = sub(mul(exp_op(s[t]), task_losses[t]), s[t]);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

std::vector<std::vector<double>> pcgrad_project(
    const std::vector<std::vector<double>>& grads, RngStream& rng,
    int* skipped_zero_norm) {
  IMTL_CHECK(grads.size() >= 2, "pcgrad: need at least two tasks");
  size_t dim = grads[0].size();
  for (const auto& g : grads) {
    IMTL_CHECK(g.size() == dim, "pcgrad: gradient lengths differ");
  }
  int skipped = 0;
  std::vector<std::vector<double>> out = grads;
  std::vector<int> order(grads.size());
  for (size_t i = 0; i < grads.size(); ++i) {
    for (size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    rng.shuffle(order);
    auto& gi = out[i];
    for (int j : order) {
      if (static_cast<size_t>(j) == i) continue;
      const auto& gj = grads[static_cast<size_t>(j)];
      double dot = 0.0, norm2 = 0.0;
      for (size_t k = 0; k < dim; ++k) {
        dot += gi[k] * gj[k];
        norm2 += gj[k] * gj[k];
      }
      if (dot >= 0.0) continue;
      if (norm2 <= 0.0) {
        ++skipped;
        continue;
      }
      double coef = dot / norm2;
      for (size_t k = 0; k < dim; ++k) gi[k] -= coef * gj[k];
    }
  }
  if (skipped_zero_norm) *skipped_zero_norm = skipped;
  return out;
}

std::vector<double> pcgrad_combine(
    const std::vector<std::vector<double>>& grads, RngStream& rng,
    int* skipped_zero_norm) {
  auto projected = pcgrad_project(grads, rng, skipped_zero_norm);
  std::vector<double> sum(projected[0].size(), 0.0);
  for (const auto& g : projected) {
    for (size_t k = 0; k < sum.size(); ++k) sum[k] += g[k];
  }
  return sum;
}

TaskWeightState TaskWeightState::create(Method method, int num_tasks,
                                        const std::vector<int64_t>& train_counts,
                                        RngStream rlw_rng,
                                        double dwa_temperature) {
  IMTL_CHECK(num_tasks >= 1, "weight state: need at least one task");
  TaskWeightState st;
  st.method_ = method;
  st.num_tasks_ = num_tasks;
  st.train_counts_ = train_counts;
  st.dwa_temperature_ = dwa_temperature;
  st.rlw_rng_ = rlw_rng;
  st.dwa_weights_.assign(static_cast<size_t>(num_tasks), 1.0);
  if (method == Method::uw || method == Method::imtl_l) {
    for (int t = 0; t < num_tasks; ++t) {
      st.learnable_.push_back(Tensor::zeros({1}, true));
    }
  }
  if (method == Method::tw) {
    IMTL_CHECK(static_cast<int>(train_counts.size()) == num_tasks,
               "weight state: tw needs per-task train counts");
  }
  return st;
}

std::vector<double> TaskWeightState::current_weights() {
  switch (method_) {
    case Method::tw:
      return weights_tw(train_counts_);
    case Method::dwa:
      return dwa_weights_;
    case Method::rlw:
      return weights_rlw(num_tasks_, rlw_rng_);
    default:
      return weights_ew(num_tasks_);
  }
}

Tensor TaskWeightState::combine(const std::vector<Tensor>& task_losses) {
  switch (method_) {
    case Method::si:
      return loss_si(task_losses);
    case Method::gls:
      return loss_gls(task_losses);
    case Method::uw:
      return loss_uw(task_losses, learnable_);
    case Method::imtl_l:
      return loss_imtl_l(task_losses, learnable_);
    case Method::tw:
    case Method::dwa:
    case Method::rlw:
      return weighted_sum(task_losses, current_weights());
    default:
      throw ConfigError("weight state: combine() not applicable to '" +
                        method_name(method_) + "'");
  }
}

void TaskWeightState::end_epoch(const std::vector<double>& per_task_mean_loss) {
  if (method_ != Method::dwa) return;
  IMTL_CHECK(static_cast<int>(per_task_mean_loss.size()) == num_tasks_,
             "weight state: per-task loss count mismatch");
  history_.insert(history_.begin(), per_task_mean_loss);
  if (history_.size() > 2) history_.resize(2);
  if (history_.size() == 2) {
    dwa_weights_ = weights_dwa(history_[0], history_[1], dwa_temperature_);
  }
  // bootstrap epochs keep equal weights
}

std::vector<std::pair<std::string, Tensor>> TaskWeightState::named_parameters()
    const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t t = 0; t < learnable_.size(); ++t) {
    out.emplace_back("weighting.s" + std::to_string(t), learnable_[t]);
  }
  return out;
}

}  // namespace infomtl
