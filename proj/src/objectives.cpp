#include "infomtl/objectives.hpp"

#include "infomtl/common.hpp"

namespace infomtl {

void ObjectiveConfig::validate() const {
  IMTL_CHECK(alpha >= 0.0, "objective: alpha must be >= 0");
  IMTL_CHECK(beta >= 0.0, "objective: beta must be >= 0");
  IMTL_CHECK(tau > 0.0, "objective: tau must be > 0");
  for (double w : task_weights) {
    IMTL_CHECK(w >= 0.0, "objective: task weights must be >= 0");
  }
}

ObjectiveConfig ObjectiveConfig::normalized() const {
  validate();
  ObjectiveConfig c = *this;
  switch (mode) {
    case Method::infomtl:
      break;
    case Method::simax_only:
      c.beta = 0.0;
      break;
    case Method::timin_only:
      c.alpha = 0.0;
      break;
    default:  // ew and every weighting baseline
      c.alpha = 0.0;
      c.beta = 0.0;
      break;
  }
  return c;
}

namespace {

struct TaskPieces {
  std::vector<Tensor> ce_sums;  // scalar sum of per-example CE, per task
  TaskLossSet set;
};

// Shared assembly: encode once, route each task's rows through its head,
// and fold per-task CE sums into the batch mean.
TaskLossSet assemble(const MultiTaskBatch& batch, const ModelState& model,
                     RngStream& dropout_rng, RngStream* sample_rng, bool train,
                     bool stochastic) {
  IMTL_CHECK(batch.size() > 0, "loss: empty batch");
  IMTL_CHECK(static_cast<int>(batch.rows_by_task.size()) == model.num_tasks(),
             "loss: batch task count does not match the model");

  TaskLossSet out;
  out.z = model.encode(batch.x, &dropout_rng, train);
  int T = model.num_tasks();
  out.task_ce.resize(static_cast<size_t>(T));
  out.counts.assign(static_cast<size_t>(T), 0);

  Tensor ce_sum_total;
  Tensor kl_sum_total;
  for (int t = 0; t < T; ++t) {
    const auto& rows = batch.rows_by_task[static_cast<size_t>(t)];
    if (rows.empty()) continue;
    out.counts[static_cast<size_t>(t)] = static_cast<int>(rows.size());
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (int r : rows) labels.push_back(batch.labels[static_cast<size_t>(r)]);
    Tensor zt_in = gather_rows(out.z, rows);

    Tensor ce_vec;
    if (stochastic) {
      auto sf = model.stochastic_forward(
          zt_in, t, sample_rng, train ? SampleMode::sample : SampleMode::mean);
      ce_vec = per_example_ce(sf.z_t, labels);
      Tensor kl_sum = scale(kl_diag_gaussian(sf.mu, sf.logvar),
                            static_cast<double>(rows.size()));
      kl_sum_total = kl_sum_total.defined() ? add(kl_sum_total, kl_sum) : kl_sum;
    } else {
      ce_vec = per_example_ce(model.head_logits(zt_in, t), labels);
    }
    Tensor ce_sum = sum_all(ce_vec);
    out.task_ce[static_cast<size_t>(t)] =
        scale(ce_sum, 1.0 / static_cast<double>(rows.size()));
    ce_sum_total = ce_sum_total.defined() ? add(ce_sum_total, ce_sum) : ce_sum;
  }
  IMTL_CHECK(ce_sum_total.defined(), "loss: batch contains no examples");
  double inv_b = 1.0 / static_cast<double>(batch.size());
  out.mean_ce = scale(ce_sum_total, inv_b);
  if (stochastic) out.kl = scale(kl_sum_total, inv_b);
  return out;
}

std::vector<double> per_task_values(const TaskLossSet& set) {
  std::vector<double> out;
  for (const auto& t : set.task_ce) out.push_back(t.defined() ? t.item() : 0.0);
  return out;
}

}  // namespace

TaskLossSet per_task_ce_losses(const MultiTaskBatch& batch,
                               const ModelState& model, RngStream& dropout_rng,
                               bool train) {
  IMTL_CHECK(!model.det_heads.empty(),
             "loss: deterministic heads required for mode '" +
                 method_name(model.mode) + "'");
  return assemble(batch, model, dropout_rng, nullptr, train, false);
}

TaskLossSet per_task_stochastic_losses(const MultiTaskBatch& batch,
                                       const ModelState& model,
                                       RngStream& dropout_rng,
                                       RngStream& sample_rng, bool train) {
  IMTL_CHECK(!model.sto_heads.empty(),
             "loss: stochastic heads required for mode '" +
                 method_name(model.mode) + "'");
  return assemble(batch, model, dropout_rng, &sample_rng, train, true);
}

LossBreakdown ew_loss(const MultiTaskBatch& batch, const ModelState& model,
                      RngStream& dropout_rng) {
  TaskLossSet set = per_task_ce_losses(batch, model, dropout_rng, true);
  LossBreakdown out;
  out.total = set.mean_ce;
  out.ce = set.mean_ce.item();
  out.per_task_ce = per_task_values(set);
  out.per_task_count = set.counts;
  return out;
}

LossBreakdown simax_loss(const MultiTaskBatch& batch, const ModelState& model,
                         const ObjectiveConfig& config,
                         RngStream& dropout_rng) {
  ObjectiveConfig cfg = config.normalized();
  TaskLossSet set = per_task_ce_losses(batch, model, dropout_rng, true);
  LossBreakdown out;
  out.ce = set.mean_ce.item();
  out.per_task_ce = per_task_values(set);
  out.per_task_count = set.counts;
  if (cfg.alpha > 0.0) {
    Tensor zpos = model.encode(batch.x, &dropout_rng, true);
    Tensor nce = infonce(set.z, zpos, cfg.tau);
    out.infonce = nce.item();
    out.total = add(set.mean_ce, scale(nce, cfg.alpha));
  } else {
    out.total = set.mean_ce;
  }
  return out;
}

LossBreakdown timin_loss(const MultiTaskBatch& batch, const ModelState& model,
                         const ObjectiveConfig& config, RngStream& dropout_rng,
                         RngStream& sample_rng) {
  ObjectiveConfig cfg = config.normalized();
  TaskLossSet set =
      per_task_stochastic_losses(batch, model, dropout_rng, sample_rng, true);
  LossBreakdown out;
  out.ce = set.mean_ce.item();
  out.kl = set.kl.item();
  out.per_task_ce = per_task_values(set);
  out.per_task_count = set.counts;
  out.total = cfg.beta > 0.0 ? add(set.mean_ce, scale(set.kl, cfg.beta))
                             : set.mean_ce;
  return out;
}

LossBreakdown infomtl_loss(const MultiTaskBatch& batch,
                           const ModelState& model,
                           const ObjectiveConfig& config,
                           RngStream& dropout_rng, RngStream& sample_rng) {
  ObjectiveConfig cfg = config.normalized();
  TaskLossSet set =
      per_task_stochastic_losses(batch, model, dropout_rng, sample_rng, true);
  LossBreakdown out;
  out.ce = set.mean_ce.item();
  out.kl = set.kl.item();
  out.per_task_ce = per_task_values(set);
  out.per_task_count = set.counts;
  Tensor total = cfg.beta > 0.0 ? add(set.mean_ce, scale(set.kl, cfg.beta))
                                : set.mean_ce;
  if (cfg.alpha > 0.0) {
    IMTL_CHECK(batch.size() >= 2, "infomtl: batch must have at least 2 rows");
    Tensor zpos = model.encode(batch.x, &dropout_rng, true);
    Tensor nce = infonce(set.z, zpos, cfg.tau);
    out.infonce = nce.item();
    total = add(total, scale(nce, cfg.alpha));
  }
  out.total = total;
  return out;
}

LossBreakdown objective_loss(const MultiTaskBatch& batch,
                             const ModelState& model,
                             const ObjectiveConfig& config,
                             RngStream& dropout_rng, RngStream& sample_rng) {
  switch (config.mode) {
    case Method::infomtl:
      return infomtl_loss(batch, model, config, dropout_rng, sample_rng);
    case Method::simax_only:
      return simax_loss(batch, model, config, dropout_rng);
    case Method::timin_only:
      return timin_loss(batch, model, config, dropout_rng, sample_rng);
    case Method::ew:
      return ew_loss(batch, model, dropout_rng);
    default:
      throw ConfigError(
          "objective_loss: weighting baseline '" + method_name(config.mode) +
          "' is composed by the trainer, not the objective dispatcher");
  }
}

std::vector<int> predict_labels(const ModelState& model, const Tensor& x,
                                int task) {
  Tensor z = model.encode(x, nullptr, false);
  if (!model.det_heads.empty()) {
    return argmax_rows(model.head_logits(z, task));
  }
  auto sf = model.stochastic_forward(z, task, nullptr, SampleMode::mean);
  return argmax_rows(sf.z_t);
}

}  // namespace infomtl
