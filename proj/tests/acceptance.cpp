// Acceptance suite: runs every exit criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code 0 iff all pass.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <vector>

#include "infomtl/gradcheck.hpp"
#include "infomtl/metrics.hpp"
#include "infomtl/objectives.hpp"
#include "infomtl/robustness.hpp"
#include "infomtl/trainer.hpp"
#include "infomtl/weighting.hpp"

using namespace infomtl;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
 public:
  explicit Criterion(int id, std::string title)
      : id_(id), title_(std::move(title)),
        start_(std::chrono::steady_clock::now()) {}

  void check(bool ok, const std::string& detail) {
    if (!ok) {
      ok_ = false;
      details_.push_back(detail);
    }
  }

  ~Criterion() {
    auto elapsed = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start_)
                       .count();
    std::ostringstream os;
    os << (ok_ ? "PASS" : "FAIL") << " criterion " << id_ << ": " << title_
       << "  [" << std::fixed;
    os.precision(1);
    os << elapsed << "s]";
    std::cout << os.str() << "\n";
    for (const auto& d : details_) std::cout << "      " << d << "\n";
    if (!ok_) ++g_failures;
  }

 private:
  int id_;
  std::string title_;
  bool ok_ = true;
  std::vector<std::string> details_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- 1

void criterion1_metric_arithmetic() {
  Criterion c(1, "Avg/delta_p reproduce the published table arithmetic");
  std::vector<std::vector<double>> infomtl = {{76.90}, {48.44}, {68.94},
                                              {79.78}, {71.92}, {65.02}};
  std::vector<std::vector<double>> ew = {{74.37}, {44.08}, {65.32},
                                         {79.04}, {70.64}, {63.59}};
  std::vector<std::vector<MetricSpec>> specs(6);
  for (auto& s : specs) s.push_back({MetricKind::macro_f1, {}, true});

  double avg_i = avg_score(infomtl);
  double avg_e = avg_score(ew);
  double dp = delta_p(infomtl, ew, specs);
  c.check(std::abs(avg_i - 68.50) <= 0.01, "Avg(InfoMTL)=" + fmt(avg_i));
  c.check(std::abs(avg_e - 66.17) <= 0.01, "Avg(EW)=" + fmt(avg_e));
  c.check(std::abs(dp - 3.97) <= 0.01, "delta_p=" + fmt(dp));
}

// ---------------------------------------------------------------- 2

MultiTaskBatch toy_batch() {
  RngStream rng(404);
  MultiTaskBatch b;
  std::vector<double> feats(6 * 8);
  for (double& v : feats) v = rng.normal();
  b.x = Tensor::from_values({6, 8}, std::move(feats));
  b.labels = {0, 2, 1, 0, 1, 1};
  b.task_ids = {0, 0, 0, 1, 1, 1};
  b.rows_by_task = {{0, 1, 2}, {3, 4, 5}};
  return b;
}

void criterion2_gradient_oracle() {
  Criterion c(2, "tape gradients match central differences on every loss mode");
  MultiTaskBatch batch = toy_batch();

  struct Case {
    std::string name;
    Method mode;
  };
  std::vector<Case> cases = {
      {"ew", Method::ew},           {"simax_only", Method::simax_only},
      {"timin_only", Method::timin_only}, {"infomtl", Method::infomtl},
      {"uw", Method::uw},           {"imtl_l", Method::imtl_l},
      {"gls", Method::gls},         {"si", Method::si}};

  for (const auto& kase : cases) {
    ModelState model = ModelState::create(kase.mode, 8, {6}, 4, {3, 2}, 0.2,
                                          RngStream(17));
    TaskWeightState wstate = TaskWeightState::create(
        kase.mode, 2, {3, 3}, RngStream(18));
    ObjectiveConfig cfg{kase.mode, 0.3, 0.1, 0.7, {}};

    std::vector<Tensor> params = model.parameters();
    for (auto& [name, t] : wstate.named_parameters()) params.push_back(t);
    // nudge learnable scalars off the neutral point
    for (auto& [name, t] : wstate.named_parameters()) {
      t.mutable_values()[0] = 0.2;
    }

    auto loss_expr = [&]() -> Tensor {
      RngStream drop(909), samp(910);
      if (is_weighting_baseline(kase.mode)) {
        TaskLossSet set = per_task_ce_losses(batch, model, drop, true);
        std::vector<Tensor> pieces;
        for (auto& t : set.task_ce) pieces.push_back(t);
        return wstate.combine(pieces);
      }
      return objective_loss(batch, model, cfg, drop, samp).total;
    };

    std::vector<std::vector<double>> analytic;
    {
      Tape tape;
      Tensor loss = loss_expr();
      tape.backward(loss);
      for (auto& p : params) {
        analytic.push_back(p.has_grad()
                               ? p.grad()
                               : std::vector<double>(p.values().size(), 0.0));
      }
    }
    auto f = [&]() { return loss_expr().item(); };
    FdReport report = finite_difference_check(f, params, analytic, 1e-5, 1e-4);
    c.check(report.ok(),
            kase.name + ": max rel error " + fmt(report.max_rel_error) +
                " over " + std::to_string(report.checked_coords) + " coords");
  }
}

// ---------------------------------------------------------------- 3

void criterion3_kl_oracle() {
  Criterion c(3, "analytic KL matches Monte-Carlo estimates within 1%");
  RngStream rng(77);
  const int pairs = 20;
  const int samples = 1000000;
  const int dim = 3;
  for (int p = 0; p < pairs; ++p) {
    std::vector<double> mu(dim), lv(dim);
    for (double& v : mu) v = 4.0 * rng.uniform() - 2.0;
    for (double& v : lv) v = 4.0 * rng.uniform() - 2.0;
    double analytic = kl_diag_gaussian(Tensor::from_values({1, dim}, mu),
                                       Tensor::from_values({1, dim}, lv))
                          .item();
    double acc = 0.0;
    RngStream mc(1000 + static_cast<uint64_t>(p));
    std::vector<double> sigma(dim);
    for (int d = 0; d < dim; ++d) sigma[static_cast<size_t>(d)] =
        std::exp(0.5 * lv[static_cast<size_t>(d)]);
    for (int s = 0; s < samples; ++s) {
      double term = 0.0;
      for (int d = 0; d < dim; ++d) {
        double eps = mc.normal();
        double z = mu[static_cast<size_t>(d)] + sigma[static_cast<size_t>(d)] * eps;
        // log q - log p with matching constants cancelled
        double logq = -0.5 * eps * eps - 0.5 * lv[static_cast<size_t>(d)];
        double logp = -0.5 * z * z;
        term += logq - logp;
      }
      acc += term;
    }
    double mc_est = acc / samples;
    double rel = std::abs(mc_est - analytic) / std::abs(analytic);
    c.check(rel < 0.01, "pair " + std::to_string(p) + ": analytic " +
                            fmt(analytic) + " vs mc " + fmt(mc_est));
  }
}

// ---------------------------------------------------------------- 4

void criterion4_infonce_closed_forms() {
  Criterion c(4, "InfoNCE closed forms (uniform and orthogonal-cross)");
  std::vector<double> row = {0.5, -1.0, 2.0};
  for (int b : {2, 4, 8}) {
    std::vector<double> all;
    for (int i = 0; i < b; ++i) all.insert(all.end(), row.begin(), row.end());
    Tensor z = Tensor::from_values({b, 3}, all);
    double loss = infonce(z, z, 1.0).item();
    c.check(std::abs(loss - std::log(static_cast<double>(b))) <= 1e-12,
            "uniform B=" + std::to_string(b) + ": " + fmt(loss));
  }
  for (int b : {2, 4, 8}) {
    for (double tau : {0.1, 1.0}) {
      std::vector<double> eye(static_cast<size_t>(b) * b, 0.0);
      for (int i = 0; i < b; ++i) eye[static_cast<size_t>(i * b + i)] = 1.0;
      Tensor z = Tensor::from_values({b, b}, eye);
      double loss = infonce(z, z, tau).item();
      double expected = std::log(1.0 + (b - 1) * std::exp(-1.0 / tau));
      c.check(std::abs(loss - expected) <= 1e-12,
              "orthogonal B=" + std::to_string(b) + " tau=" + fmt(tau) +
                  ": " + fmt(loss) + " vs " + fmt(expected));
    }
  }
}

// ---------------------------------------------------------------- 5

void criterion5_pcgrad() {
  Criterion c(5, "PCGrad projection and pass-through invariants");
  RngStream rng(31);
  int checked = 0;
  for (int trial = 0; checked < 100; ++trial) {
    std::vector<double> g1(16), g2(16);
    for (double& v : g1) v = rng.normal();
    for (double& v : g2) v = rng.normal();
    double dot = std::inner_product(g1.begin(), g1.end(), g2.begin(), 0.0);
    if (dot >= 0.0) {
      for (double& v : g2) v = -v;
      dot = -dot;
    }
    if (dot >= 0.0) continue;
    RngStream prng(static_cast<uint64_t>(trial));
    auto projected = pcgrad_project({g1, g2}, prng);
    double post1 =
        std::inner_product(projected[0].begin(), projected[0].end(),
                           g2.begin(), 0.0);
    double post2 =
        std::inner_product(projected[1].begin(), projected[1].end(),
                           g1.begin(), 0.0);
    if (std::abs(post1) > 1e-10 || std::abs(post2) > 1e-10) {
      c.check(false, "trial " + std::to_string(trial) + ": post dots " +
                         fmt(post1) + ", " + fmt(post2));
    }
    ++checked;
  }

  std::vector<std::vector<double>> friendly = {
      {0.3, 1.2, -0.7}, {0.1, 0.9, -0.2}, {0.25, 0.5, -0.4}};
  std::vector<double> expected(3, 0.0);
  for (const auto& g : friendly) {
    for (size_t i = 0; i < 3; ++i) expected[i] += g[i];
  }
  RngStream prng(5);
  auto combined = pcgrad_combine(friendly, prng);
  c.check(combined == expected, "non-conflicting set passes through bitwise");
}

// ---------------------------------------------------------------- 6 & 7

struct SeedOutcome {
  std::vector<std::vector<double>> scores;  // per task
  double avg = 0;
  double robust_avg_eps1 = 0;
  std::vector<double> uniformity;
  std::vector<double> ari;
};

TrainConfig suite_config(Method mode, const std::string& name) {
  TrainConfig cfg;
  cfg.name = name;
  cfg.objective.mode = mode;
  if (mode == Method::infomtl) {
    cfg.objective.alpha = 0.1;   // synthetic-suite defaults
    cfg.objective.beta = 0.01;
    cfg.objective.tau = 1.0;
  }
  cfg.epochs = 20;
  cfg.patience = 3;
  cfg.batch_size = 128;
  cfg.lr = 3e-3;  // from-scratch MLP scale (see README)
  cfg.dropout = 0.2;
  cfg.hidden = {64};
  cfg.repr_dim = 32;
  return cfg;
}

SeedOutcome run_method_seed(const MultiTaskDataset& ds, Method mode,
                            uint64_t seed) {
  TrainConfig cfg = suite_config(mode, method_name(mode));
  cfg.seed = seed;
  RunRecord rec = train(ds, cfg);
  SeedOutcome out;
  out.scores = rec.test_scores;
  out.avg = rec.test_avg;
  out.uniformity = rec.uniformity_per_task;
  out.ari = rec.ari_per_task;
  PerturbSpec spec;
  spec.kind = PerturbKind::gaussian;
  spec.epsilons = {0.0, 1.0};
  spec.seed = 90 + seed;
  RobustReport rr = robust_evaluate(rec.model, ds, spec);
  out.robust_avg_eps1 = rr.avg_at(1);
  return out;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
}

void criteria6_7_directional(const MultiTaskDataset& ds) {
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<SeedOutcome> info_runs, ew_runs;
  for (uint64_t s : seeds) {
    info_runs.push_back(run_method_seed(ds, Method::infomtl, s));
    ew_runs.push_back(run_method_seed(ds, Method::ew, s));
  }

  std::vector<std::vector<MetricSpec>> specs;
  for (const auto& t : ds.tasks) specs.push_back({t.metric});

  {
    Criterion c(6, "directional synthetic reproduction (Avg, robust, quality)");
    std::vector<double> info_avgs, ew_avgs;
    for (const auto& r : info_runs) info_avgs.push_back(r.avg);
    for (const auto& r : ew_runs) ew_avgs.push_back(r.avg);

    // (a) mean test Avg and per-seed delta_p direction
    double mi = mean(info_avgs), me = mean(ew_avgs);
    c.check(mi >= me, "(a) mean Avg: infomtl " + fmt(mi) + " vs ew " + fmt(me));
    int positive_dp = 0;
    for (size_t s = 0; s < seeds.size(); ++s) {
      double dp = delta_p(info_runs[s].scores, ew_runs[s].scores, specs);
      if (dp > 0.0) ++positive_dp;
    }
    c.check(positive_dp >= 4, "(a) delta_p > 0 in " +
                                  std::to_string(positive_dp) + "/5 seeds");

    // (b) Gaussian eps=1 robust Avg
    std::vector<double> info_rob, ew_rob;
    for (const auto& r : info_runs) info_rob.push_back(r.robust_avg_eps1);
    for (const auto& r : ew_runs) ew_rob.push_back(r.robust_avg_eps1);
    double rmi = mean(info_rob), rme = mean(ew_rob);
    c.check(rmi > rme,
            "(b) robust Avg @ eps=1: infomtl " + fmt(rmi) + " vs ew " + fmt(rme));

    // (c) representation quality per task, mean over seeds
    int uni_ok = 0, ari_ok = 0;
    for (int t = 0; t < ds.num_tasks(); ++t) {
      std::vector<double> ui, ue, ai, ae;
      for (const auto& r : info_runs) {
        ui.push_back(r.uniformity[static_cast<size_t>(t)]);
        ai.push_back(r.ari[static_cast<size_t>(t)]);
      }
      for (const auto& r : ew_runs) {
        ue.push_back(r.uniformity[static_cast<size_t>(t)]);
        ae.push_back(r.ari[static_cast<size_t>(t)]);
      }
      if (mean(ui) <= mean(ue)) ++uni_ok;
      if (mean(ai) >= mean(ae)) ++ari_ok;
    }
    c.check(uni_ok >= 4, "(c) uniformity lower-or-equal on " +
                             std::to_string(uni_ok) + "/6 tasks");
    c.check(ari_ok >= 4,
            "(c) ARI higher-or-equal on " + std::to_string(ari_ok) + "/6 tasks");
  }

  {
    Criterion c(7, "ablation ordering: ew never beats full infomtl");
    std::vector<double> info_avgs, ew_avgs;
    for (const auto& r : info_runs) info_avgs.push_back(r.avg);
    for (const auto& r : ew_runs) ew_avgs.push_back(r.avg);
    double mi = mean(info_avgs), me = mean(ew_avgs);
    double tie_band = sample_std(info_avgs);
    c.check(me <= mi + tie_band,
            "mean Avg: ew " + fmt(me) + " vs infomtl " + fmt(mi) +
                " (tie band " + fmt(tie_band) + ")");
  }
}

// ---------------------------------------------------------------- 8

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void criterion8_reproducibility() {
  Criterion c(8, "identical manifest + seed give byte-identical outputs");
  SyntheticConfig dcfg;
  dcfg.seed = 5151;
  dcfg.shared_dims = 4;
  dcfg.per_task_dims = 2;
  dcfg.redundant_dims = 6;
  dcfg.label_noise = 0.1;
  dcfg.feature_noise = 0.3;
  dcfg.tasks = {{"a", 2, 60, 30, 40}, {"b", 3, 50, 30, 40}};
  MultiTaskDataset ds = generate_synthetic(dcfg);

  SuiteConfig suite;
  suite.name = "repro";
  suite.seeds = {11};
  TrainConfig ew = suite_config(Method::ew, "ew");
  ew.epochs = 3;
  ew.patience = 3;
  ew.batch_size = 16;
  ew.hidden = {8};
  ew.repr_dim = 6;
  TrainConfig info = suite_config(Method::infomtl, "infomtl");
  info.epochs = 3;
  info.patience = 3;
  info.batch_size = 16;
  info.hidden = {8};
  info.repr_dim = 6;
  info.diag_every = 1;
  suite.methods = {ew, info};

  fs::path base = fs::temp_directory_path() / "imtl_acceptance_repro";
  fs::remove_all(base);
  run_suite(ds, suite, base / "one");
  run_suite(ds, suite, base / "two");

  c.check(slurp(base / "one" / "report.csv") ==
              slurp(base / "two" / "report.csv"),
          "report.csv differs");
  for (const char* method : {"ew", "infomtl"}) {
    auto rel = fs::path(method) / "seed11" / "summary.json";
    c.check(slurp(base / "one" / rel) == slurp(base / "two" / rel),
            std::string(method) + "/seed11/summary.json differs");
  }
  fs::remove_all(base);
}

// ---------------------------------------------------------------- 9

void criterion9_early_stopping() {
  Criterion c(9, "early stopping halts at patience and restores the argmax");
  SyntheticConfig dcfg;
  dcfg.seed = 99;
  dcfg.shared_dims = 4;
  dcfg.per_task_dims = 2;
  dcfg.redundant_dims = 4;
  dcfg.label_noise = 0.05;
  dcfg.feature_noise = 0.2;
  dcfg.tasks = {{"a", 2, 60, 30, 40}, {"b", 3, 50, 30, 40}};
  MultiTaskDataset ds = generate_synthetic(dcfg);

  TrainConfig cfg = suite_config(Method::ew, "ew");
  cfg.epochs = 10;
  cfg.patience = 3;
  cfg.batch_size = 16;
  cfg.hidden = {8};
  cfg.repr_dim = 6;
  cfg.seed = 21;
  cfg.val_avg_stub = {1, 2, 2, 2, 2, 9, 9, 9, 9, 9};
  RunRecord rigged = train(ds, cfg);
  c.check(rigged.epoch_log.size() == 5,
          "stopped after " + std::to_string(rigged.epoch_log.size()) +
              " epochs (want 5)");
  c.check(rigged.best_epoch == 2,
          "best epoch " + std::to_string(rigged.best_epoch) + " (want 2)");

  // the restored weights equal a run truncated at the argmax epoch
  TrainConfig two = cfg;
  two.epochs = 2;
  two.patience = 2;
  two.val_avg_stub = {1, 2};
  RunRecord truncated = train(ds, two);
  auto pa = rigged.model.parameters();
  auto pb = truncated.model.parameters();
  bool same = pa.size() == pb.size();
  for (size_t i = 0; same && i < pa.size(); ++i) {
    same = pa[i].values() == pb[i].values();
  }
  c.check(same, "restored checkpoint does not match the argmax-epoch weights");
}

}  // namespace

int main() {
  std::cout << "InfoMTL acceptance suite\n";
  auto t0 = std::chrono::steady_clock::now();

  criterion1_metric_arithmetic();
  criterion2_gradient_oracle();
  criterion3_kl_oracle();
  criterion4_infonce_closed_forms();
  criterion5_pcgrad();

  MultiTaskDataset suite_ds = generate_synthetic(default_synthetic_config(20));
  criteria6_7_directional(suite_ds);

  criterion8_reproducibility();
  criterion9_early_stopping();

  auto total = std::chrono::duration<double>(
                   std::chrono::steady_clock::now() - t0)
                   .count();
  std::cout.precision(1);
  std::cout << std::fixed << "total " << total << "s, " << g_failures
            << " failing criterion(s)\n";
  return g_failures == 0 ? 0 : 1;
}
