#include "infomtl/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "infomtl/common.hpp"
#include "infomtl/objectives.hpp"

namespace infomtl {

std::string perturb_kind_name(PerturbKind k) {
  return k == PerturbKind::gaussian ? "gaussian" : "fgm";
}

PerturbKind perturb_kind_from_name(const std::string& name) {
  if (name == "gaussian") return PerturbKind::gaussian;
  if (name == "fgm") return PerturbKind::fgm;
  throw ConfigError("unknown perturbation kind '" + name + "'");
}

void PerturbSpec::validate() const {
  IMTL_CHECK(!epsilons.empty(), "perturb: empty strength grid");
  bool has_zero = false;
  for (double e : epsilons) {
    IMTL_CHECK(e >= 0.0, "perturb: strengths must be >= 0");
    if (e == 0.0) has_zero = true;
  }
  IMTL_CHECK(has_zero, "perturb: grid must contain the eps=0 anchor");
}

Tensor perturb_gaussian(const Tensor& x, double eps, RngStream& rng) {
  IMTL_CHECK(eps >= 0.0, "perturb: eps must be >= 0");
  if (eps == 0.0) return x;
  int n = x.rows(), d = x.cols();
  std::vector<double> out = x.values();
  std::vector<double> delta(static_cast<size_t>(d));
  for (int i = 0; i < n; ++i) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int c = 0; c < d; ++c) {
        delta[static_cast<size_t>(c)] = rng.normal();
        norm += delta[static_cast<size_t>(c)] * delta[static_cast<size_t>(c)];
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (int c = 0; c < d; ++c) {
      out[static_cast<size_t>(i * d + c)] +=
          eps * delta[static_cast<size_t>(c)] / norm;
    }
  }
  return Tensor::from_values(x.shape(), std::move(out));
}

FgmResult fgm_with_loss(const Tensor& x,
                        const std::function<Tensor(const Tensor&)>& loss_fn,
                        double eps) {
  IMTL_CHECK(eps >= 0.0, "perturb: eps must be >= 0");
  if (eps == 0.0) return {x, 0};
  int n = x.rows(), d = x.cols();
  Tensor leaf = Tensor::from_values(x.shape(), x.values(), true);
  std::vector<double> grad;
  {
    Tape tape;
    Tensor loss = loss_fn(leaf);
    tape.backward(loss);
    IMTL_CHECK(leaf.has_grad(), "fgm: loss does not depend on the input");
    grad = leaf.grad();
  }
  FgmResult res;
  std::vector<double> out = x.values();
  for (int i = 0; i < n; ++i) {
    double norm = 0.0;
    for (int c = 0; c < d; ++c) {
      double g = grad[static_cast<size_t>(i * d + c)];
      norm += g * g;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      ++res.zero_grad_rows;  // row stays unperturbed
      continue;
    }
    for (int c = 0; c < d; ++c) {
      out[static_cast<size_t>(i * d + c)] +=
          eps * grad[static_cast<size_t>(i * d + c)] / norm;
    }
  }
  res.x_tilde = Tensor::from_values(x.shape(), std::move(out));
  return res;
}

FgmResult perturb_fgm(const Tensor& x, const std::vector<int>& labels,
                      int task, const ModelState& model, double eps) {
  IMTL_CHECK(static_cast<size_t>(x.rows()) == labels.size(),
             "fgm: one label per row required");
  auto loss_fn = [&](const Tensor& leaf) {
    Tensor z = model.encode(leaf, nullptr, false);
    Tensor logits;
    if (!model.det_heads.empty()) {
      logits = model.head_logits(z, task);
    } else {
      logits = model.stochastic_forward(z, task, nullptr, SampleMode::mean).z_t;
    }
    // sum (not mean) keeps per-example separability; scale is irrelevant
    // after per-row normalization
    return sum_all(per_example_ce(logits, labels));
  };
  FgmResult res = fgm_with_loss(x, loss_fn, eps);
  for (auto p : model.parameters()) {
    p.zero_grad();  // test-time grads must not linger
  }
  return res;
}

double RobustReport::avg_at(size_t eps_index) const {
  IMTL_CHECK(eps_index < epsilons.size(), "robust report: bad eps index");
  double acc = 0.0;
  for (const auto& task : scores) acc += task[eps_index];
  return acc / static_cast<double>(scores.size());
}

std::string RobustReport::to_csv(const std::string& method) const {
  std::ostringstream os;
  os.precision(17);
  os << "method,kind,task,epsilon,score\n";
  for (size_t t = 0; t < scores.size(); ++t) {
    for (size_t e = 0; e < epsilons.size(); ++e) {
      os << method << "," << perturb_kind_name(kind) << "," << task_names[t]
         << "," << epsilons[e] << "," << scores[t][e] << "\n";
    }
  }
  return os.str();
}

RobustReport robust_evaluate(const ModelState& model,
                             const MultiTaskDataset& ds,
                             const PerturbSpec& spec) {
  spec.validate();
  IMTL_CHECK(model.num_tasks() == ds.num_tasks(),
             "robust: model/dataset task counts differ");
  RobustReport report;
  report.kind = spec.kind;
  report.epsilons = spec.epsilons;
  RngStream root(spec.seed);
  for (int t = 0; t < ds.num_tasks(); ++t) {
    report.task_names.push_back(ds.tasks[static_cast<size_t>(t)].name);
    const Split& test = ds.data[static_cast<size_t>(t)].test;
    Tensor x = ds.split_features(t, test);
    std::vector<double> row;
    for (size_t e = 0; e < spec.epsilons.size(); ++e) {
      double eps = spec.epsilons[e];
      Tensor xt;
      if (eps == 0.0) {
        xt = x;
      } else if (spec.kind == PerturbKind::gaussian) {
        RngStream rng = root.fork("gaussian", static_cast<uint64_t>(t) * 1000 +
                                                  static_cast<uint64_t>(e));
        xt = perturb_gaussian(x, eps, rng);
      } else {
        xt = perturb_fgm(x, test.labels, t, model, eps).x_tilde;
      }
      auto preds = predict_labels(model, xt, t);
      double score = confusion_metric(test.labels, preds,
                                      ds.tasks[static_cast<size_t>(t)].classes,
                                      ds.tasks[static_cast<size_t>(t)].metric);
      row.push_back(100.0 * score);
    }
    report.scores.push_back(std::move(row));
  }
  return report;
}

}  // namespace infomtl
