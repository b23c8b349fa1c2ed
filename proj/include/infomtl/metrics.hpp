#pragma once

#include <string>
#include <vector>

#include "infomtl/rng.hpp"
#include "infomtl/tensor.hpp"

namespace infomtl {

enum class MetricKind { macro_f1, macro_recall, subset_macro_f1 };

std::string metric_kind_name(MetricKind k);
MetricKind metric_kind_from_name(const std::string& name);

struct MetricSpec {
  MetricKind kind = MetricKind::macro_f1;
  std::vector<int> class_subset;  // subset_macro_f1 only
  bool higher_is_better = true;

  std::string label() const;  // e.g. "macro_f1", "subset_macro_f1[1,2]"
  void validate(int classes) const;
};

// Confusion-matrix metric as a fraction in [0,1]. Per-class precision/recall
// with empty denominators contribute 0.
double confusion_metric(const std::vector<int>& gold,
                        const std::vector<int>& pred, int classes,
                        const MetricSpec& spec);

// Avg = (1/|T|) sum_t (1/N_t) sum_n M_{t,n}; scores[t][n] in percent.
double avg_score(const std::vector<std::vector<double>>& scores);

// Delta_p = (1/|T|) sum_t (1/N_t) sum_n
//            (-1)^{p_{t,n}} (M_{t,n} - M^EW_{t,n}) / M^EW_{t,n}, in percent.
double delta_p(const std::vector<std::vector<double>>& scores,
               const std::vector<std::vector<double>>& ew_scores,
               const std::vector<std::vector<MetricSpec>>& specs);

// log mean_{i != j} exp(-2 ||zi_hat - zj_hat||^2) over L2-normalized rows.
double uniformity(const Tensor& reprs);

// Lloyd k-means with seeded k-means++ init; `restarts` runs, best inertia.
std::vector<int> kmeans_labels(const Tensor& reprs, int k, RngStream rng,
                               int restarts = 10, int max_iters = 100);

// Adjusted Rand index by pair counting.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// k-means clustering of representations scored against gold labels.
double ari_of_representations(const Tensor& reprs, const std::vector<int>& gold,
                              int k, RngStream rng);

// InfoNCE lower bound on I(Z;Z') <= I(X;Z):  log B - infonce(z, zpos, tau).
double mi_xz_estimate(const Tensor& z, const Tensor& zpos, double tau);

// Variational upper bound on I(Z;Z_t): mean KL(q(z_t|z) || N(0,I)).
double mi_zzt_estimate(const Tensor& mu, const Tensor& logvar);

// Histogram MI between two representation sets after seeded random projection
// to at most `max_dims` dims, `bins` bins per dim. Fallback estimator for
// deterministic heads, where no posterior exists.
double mi_histogram(const Tensor& a, const Tensor& b, uint64_t seed,
                    int bins = 16, int max_dims = 2);

// Rectangular per-method score table, the unit the reports are built from.
struct ScoreTable {
  std::vector<std::string> methods;
  std::vector<std::string> task_names;
  std::vector<std::vector<MetricSpec>> specs;            // [task][metric]
  std::vector<std::vector<std::vector<double>>> scores;  // [method][task][n] %
  std::vector<double> avg;                               // per method
  std::vector<double> dp;                                // per method vs EW

  int find_method(const std::string& name) const;
  // computes avg for every row and delta_p against `ew_method`; throws
  // ConfigError if that method is absent
  void finalize(const std::string& ew_method);
  std::string to_csv() const;
};

}  // namespace infomtl
