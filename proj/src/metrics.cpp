#include "infomtl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "infomtl/common.hpp"
#include "infomtl/losses.hpp"

namespace infomtl {

std::string metric_kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::macro_f1: return "macro_f1";
    case MetricKind::macro_recall: return "macro_recall";
    case MetricKind::subset_macro_f1: return "subset_macro_f1";
  }
  throw ConfigError("unknown metric kind");
}

MetricKind metric_kind_from_name(const std::string& name) {
  if (name == "macro_f1") return MetricKind::macro_f1;
  if (name == "macro_recall") return MetricKind::macro_recall;
  if (name == "subset_macro_f1") return MetricKind::subset_macro_f1;
  throw ConfigError("unknown metric kind '" + name + "'");
}

std::string MetricSpec::label() const {
  if (kind != MetricKind::subset_macro_f1) return metric_kind_name(kind);
  std::ostringstream os;
  os << "subset_macro_f1[";
  for (size_t i = 0; i < class_subset.size(); ++i)
    os << (i ? "," : "") << class_subset[i];
  os << "]";
  return os.str();
}

void MetricSpec::validate(int classes) const {
  if (kind == MetricKind::subset_macro_f1) {
    IMTL_CHECK(!class_subset.empty(), "metric: class subset must be non-empty");
    for (int c : class_subset) {
      IMTL_CHECK(c >= 0 && c < classes,
                 "metric: subset class " + std::to_string(c) +
                     " outside [0," + std::to_string(classes) + ")");
    }
  }
}

double confusion_metric(const std::vector<int>& gold,
                        const std::vector<int>& pred, int classes,
                        const MetricSpec& spec) {
  IMTL_CHECK(gold.size() == pred.size(),
             "confusion_metric: gold/pred length mismatch");
  spec.validate(classes);
  std::vector<double> tp(static_cast<size_t>(classes), 0.0);
  std::vector<double> fp(static_cast<size_t>(classes), 0.0);
  std::vector<double> fn(static_cast<size_t>(classes), 0.0);
  for (size_t i = 0; i < gold.size(); ++i) {
    int g = gold[i], p = pred[i];
    IMTL_CHECK(g >= 0 && g < classes && p >= 0 && p < classes,
               "confusion_metric: label out of range at index " +
                   std::to_string(i));
    if (g == p) {
      tp[static_cast<size_t>(g)] += 1.0;
    } else {
      fn[static_cast<size_t>(g)] += 1.0;
      fp[static_cast<size_t>(p)] += 1.0;
    }
  }
  std::vector<int> cls;
  if (spec.kind == MetricKind::subset_macro_f1) {
    cls = spec.class_subset;
  } else {
    for (int c = 0; c < classes; ++c) cls.push_back(c);
  }
  double acc = 0.0;
  for (int c : cls) {
    size_t ci = static_cast<size_t>(c);
    double prec_den = tp[ci] + fp[ci];
    double rec_den = tp[ci] + fn[ci];
    double prec = prec_den > 0.0 ? tp[ci] / prec_den : 0.0;
    double rec = rec_den > 0.0 ? tp[ci] / rec_den : 0.0;
    if (spec.kind == MetricKind::macro_recall) {
      acc += rec;
    } else {
      acc += (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
  }
  return acc / static_cast<double>(cls.size());
}

double avg_score(const std::vector<std::vector<double>>& scores) {
  IMTL_CHECK(!scores.empty(), "avg: no tasks");
  double total = 0.0;
  for (const auto& task : scores) {
    IMTL_CHECK(!task.empty(), "avg: task with no metrics");
    double s = 0.0;
    for (double m : task) s += m;
    total += s / static_cast<double>(task.size());
  }
  return total / static_cast<double>(scores.size());
}

double delta_p(const std::vector<std::vector<double>>& scores,
               const std::vector<std::vector<double>>& ew_scores,
               const std::vector<std::vector<MetricSpec>>& specs) {
  IMTL_CHECK(scores.size() == ew_scores.size() && scores.size() == specs.size(),
             "delta_p: table shapes differ");
  IMTL_CHECK(!scores.empty(), "delta_p: no tasks");
  double total = 0.0;
  for (size_t t = 0; t < scores.size(); ++t) {
    IMTL_CHECK(scores[t].size() == ew_scores[t].size() &&
                   scores[t].size() == specs[t].size(),
               "delta_p: metric counts differ for task " + std::to_string(t));
    double s = 0.0;
    for (size_t n = 0; n < scores[t].size(); ++n) {
      IMTL_CHECK(ew_scores[t][n] != 0.0, "delta_p: zero EW reference score");
      double sign = specs[t][n].higher_is_better ? 1.0 : -1.0;
      s += sign * (scores[t][n] - ew_scores[t][n]) / ew_scores[t][n];
    }
    total += s / static_cast<double>(scores[t].size());
  }
  return 100.0 * total / static_cast<double>(scores.size());
}

double uniformity(const Tensor& reprs) {
  IMTL_CHECK(reprs.shape().size() == 2, "uniformity: need a 2-D tensor");
  int n = reprs.rows(), d = reprs.cols();
  IMTL_CHECK(n >= 2, "uniformity: need at least two rows");
  const auto& v = reprs.values();
  std::vector<double> unit(static_cast<size_t>(n) * static_cast<size_t>(d));
  for (int i = 0; i < n; ++i) {
    double norm = 0.0;
    for (int c = 0; c < d; ++c) {
      double x = v[static_cast<size_t>(i * d + c)];
      norm += x * x;
    }
    norm = std::sqrt(norm);
    IMTL_CHECK_NUM(norm > 0.0, "uniformity: zero-norm row");
    for (int c = 0; c < d; ++c)
      unit[static_cast<size_t>(i * d + c)] =
          v[static_cast<size_t>(i * d + c)] / norm;
  }
  double acc = 0.0;
  int64_t pairs = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double d2 = 0.0;
      for (int c = 0; c < d; ++c) {
        double diff = unit[static_cast<size_t>(i * d + c)] -
                      unit[static_cast<size_t>(j * d + c)];
        d2 += diff * diff;
      }
      acc += std::exp(-2.0 * d2);
      ++pairs;
    }
  }
  return std::log(acc / static_cast<double>(pairs));
}

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int c = 0; c < d; ++c) {
    double diff = a[c] - b[c];
    s += diff * diff;
  }
  return s;
}

}  // namespace

std::vector<int> kmeans_labels(const Tensor& reprs, int k, RngStream rng,
                               int restarts, int max_iters) {
  IMTL_CHECK(reprs.shape().size() == 2, "kmeans: need a 2-D tensor");
  int n = reprs.rows(), d = reprs.cols();
  IMTL_CHECK(k >= 2 && n >= k, "kmeans: need n >= k >= 2");
  const auto& v = reprs.values();
  auto row = [&](int i) { return &v[static_cast<size_t>(i * d)]; };

  std::vector<int> best_labels(static_cast<size_t>(n), 0);
  double best_inertia = std::numeric_limits<double>::infinity();

  for (int rs = 0; rs < restarts; ++rs) {
    // k-means++ seeding
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<size_t>(k));
    int first = rng.uniform_int(n);
    centers.emplace_back(row(first), row(first) + d);
    std::vector<double> d2(static_cast<size_t>(n));
    while (static_cast<int>(centers.size()) < k) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) m = std::min(m, sq_dist(row(i), c.data(), d));
        d2[static_cast<size_t>(i)] = m;
        total += m;
      }
      int pick;
      if (total <= 0.0) {
        pick = rng.uniform_int(n);  // all points coincide with centers
      } else {
        double r = rng.uniform() * total;
        pick = n - 1;
        double run = 0.0;
        for (int i = 0; i < n; ++i) {
          run += d2[static_cast<size_t>(i)];
          if (run >= r) {
            pick = i;
            break;
          }
        }
      }
      centers.emplace_back(row(pick), row(pick) + d);
    }

    std::vector<int> labels(static_cast<size_t>(n), -1);
    for (int iter = 0; iter < max_iters; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double m = sq_dist(row(i), centers[0].data(), d);
        for (int c = 1; c < k; ++c) {
          double dist = sq_dist(row(i), centers[static_cast<size_t>(c)].data(), d);
          if (dist < m) {
            m = dist;
            arg = c;
          }
        }
        if (labels[static_cast<size_t>(i)] != arg) {
          labels[static_cast<size_t>(i)] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      for (int c = 0; c < k; ++c) {
        std::vector<double> mean(static_cast<size_t>(d), 0.0);
        int count = 0;
        for (int i = 0; i < n; ++i) {
          if (labels[static_cast<size_t>(i)] != c) continue;
          const double* r = row(i);
          for (int x = 0; x < d; ++x) mean[static_cast<size_t>(x)] += r[x];
          ++count;
        }
        if (count > 0) {
          for (double& m : mean) m /= count;
          centers[static_cast<size_t>(c)] = std::move(mean);
        }
        // empty cluster keeps its previous center
      }
    }
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      inertia +=
          sq_dist(row(i), centers[static_cast<size_t>(labels[static_cast<size_t>(i)])].data(), d);
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_labels = labels;
    }
  }
  return best_labels;
}

double adjusted_rand_index(const std::vector<int>& a,
                           const std::vector<int>& b) {
  IMTL_CHECK(a.size() == b.size() && !a.empty(),
             "ari: label vectors must be non-empty and equal length");
  int ka = *std::max_element(a.begin(), a.end()) + 1;
  int kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<std::vector<int64_t>> table(
      static_cast<size_t>(ka), std::vector<int64_t>(static_cast<size_t>(kb), 0));
  for (size_t i = 0; i < a.size(); ++i) {
    IMTL_CHECK(a[i] >= 0 && b[i] >= 0, "ari: labels must be non-negative");
    table[static_cast<size_t>(a[i])][static_cast<size_t>(b[i])] += 1;
  }
  auto comb2 = [](int64_t x) { return static_cast<double>(x) * (x - 1) / 2.0; };
  double index = 0.0;
  for (const auto& r : table)
    for (int64_t c : r) index += comb2(c);
  double sum_a = 0.0, sum_b = 0.0;
  for (const auto& r : table) {
    int64_t s = 0;
    for (int64_t c : r) s += c;
    sum_a += comb2(s);
  }
  for (int j = 0; j < kb; ++j) {
    int64_t s = 0;
    for (int i = 0; i < ka; ++i) s += table[static_cast<size_t>(i)][static_cast<size_t>(j)];
    sum_b += comb2(s);
  }
  double n2 = comb2(static_cast<int64_t>(a.size()));
  double expected = n2 > 0.0 ? sum_a * sum_b / n2 : 0.0;
  double max_index = 0.5 * (sum_a + sum_b);
  double denom = max_index - expected;
  if (denom == 0.0) {
    // both partitions degenerate in the same way
    return index == expected ? 1.0 : 0.0;
  }
  return (index - expected) / denom;
}

double ari_of_representations(const Tensor& reprs, const std::vector<int>& gold,
                              int k, RngStream rng) {
  IMTL_CHECK(static_cast<size_t>(reprs.rows()) == gold.size(),
             "ari: representation rows must match label count");
  auto clusters = kmeans_labels(reprs, k, rng);
  return adjusted_rand_index(clusters, gold);
}

double mi_xz_estimate(const Tensor& z, const Tensor& zpos, double tau) {
  double b = static_cast<double>(z.rows());
  return std::log(b) - infonce(z, zpos, tau).item();
}

double mi_zzt_estimate(const Tensor& mu, const Tensor& logvar) {
  return kl_diag_gaussian(mu, logvar).item();
}

namespace {

// project to <= max_dims via seeded Gaussian projection, then bin uniformly
std::vector<int> bin_cells(const Tensor& t, uint64_t seed, int bins,
                           int max_dims) {
  int n = t.rows(), d = t.cols();
  int pd = std::min(d, max_dims);
  RngStream rng(seed);
  std::vector<double> proj(static_cast<size_t>(d) * static_cast<size_t>(pd));
  for (double& x : proj) x = rng.normal();
  std::vector<double> y(static_cast<size_t>(n) * static_cast<size_t>(pd), 0.0);
  const auto& v = t.values();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) {
      double x = v[static_cast<size_t>(i * d + c)];
      for (int p = 0; p < pd; ++p)
        y[static_cast<size_t>(i * pd + p)] += x * proj[static_cast<size_t>(c * pd + p)];
    }
  std::vector<int> cell(static_cast<size_t>(n), 0);
  for (int p = 0; p < pd; ++p) {
    double lo = y[static_cast<size_t>(p)], hi = lo;
    for (int i = 0; i < n; ++i) {
      double x = y[static_cast<size_t>(i * pd + p)];
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    double width = hi > lo ? (hi - lo) : 1.0;
    for (int i = 0; i < n; ++i) {
      double x = y[static_cast<size_t>(i * pd + p)];
      int b = static_cast<int>((x - lo) / width * bins);
      b = std::min(b, bins - 1);
      cell[static_cast<size_t>(i)] = cell[static_cast<size_t>(i)] * bins + b;
    }
  }
  return cell;
}

}  // namespace

double mi_histogram(const Tensor& a, const Tensor& b, uint64_t seed, int bins,
                    int max_dims) {
  IMTL_CHECK(a.rows() == b.rows() && a.rows() >= 2,
             "mi_histogram: need matching sample counts >= 2");
  auto ca = bin_cells(a, splitmix64(seed ^ 0x11), bins, max_dims);
  auto cb = bin_cells(b, splitmix64(seed ^ 0x22), bins, max_dims);
  // compact cell ids
  auto compact = [](std::vector<int>& c) {
    std::vector<int> sorted(c);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (int& x : c) {
      x = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), x) -
                           sorted.begin());
    }
    return static_cast<int>(sorted.size());
  };
  int na = compact(ca), nb = compact(cb);
  int n = static_cast<int>(ca.size());
  std::vector<double> pa(static_cast<size_t>(na), 0.0), pb(static_cast<size_t>(nb), 0.0);
  std::vector<std::vector<double>> pj(
      static_cast<size_t>(na), std::vector<double>(static_cast<size_t>(nb), 0.0));
  double w = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    pa[static_cast<size_t>(ca[static_cast<size_t>(i)])] += w;
    pb[static_cast<size_t>(cb[static_cast<size_t>(i)])] += w;
    pj[static_cast<size_t>(ca[static_cast<size_t>(i)])][static_cast<size_t>(cb[static_cast<size_t>(i)])] += w;
  }
  double mi = 0.0;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      double p = pj[static_cast<size_t>(i)][static_cast<size_t>(j)];
      if (p > 0.0)
        mi += p * std::log(p / (pa[static_cast<size_t>(i)] * pb[static_cast<size_t>(j)]));
    }
  return std::max(mi, 0.0);
}

int ScoreTable::find_method(const std::string& name) const {
  for (size_t i = 0; i < methods.size(); ++i)
    if (methods[i] == name) return static_cast<int>(i);
  return -1;
}

void ScoreTable::finalize(const std::string& ew_method) {
  int ew = find_method(ew_method);
  IMTL_CHECK(ew >= 0, "score table: reference method '" + ew_method +
                          "' missing (required for delta_p)");
  avg.clear();
  dp.clear();
  for (const auto& m : scores) {
    avg.push_back(avg_score(m));
    dp.push_back(delta_p(m, scores[static_cast<size_t>(ew)], specs));
  }
}

std::string ScoreTable::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "method";
  for (size_t t = 0; t < specs.size(); ++t) {
    for (const auto& s : specs[t]) {
      os << "," << (t < task_names.size() ? task_names[t] : "task" + std::to_string(t))
         << ":" << s.label();
    }
  }
  os << ",avg,delta_p\n";
  for (size_t m = 0; m < methods.size(); ++m) {
    os << methods[m];
    for (const auto& task : scores[m])
      for (double v : task) os << "," << v;
    os << "," << avg[m] << "," << dp[m] << "\n";
  }
  return os.str();
}

}  // namespace infomtl
