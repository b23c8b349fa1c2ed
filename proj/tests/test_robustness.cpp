#include <doctest.h>

#include <cmath>
#include <vector>

#include "infomtl/losses.hpp"
#include "infomtl/robustness.hpp"
#include "infomtl/trainer.hpp"

using namespace infomtl;

namespace {

SyntheticConfig robust_config(uint64_t seed) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.shared_dims = 4;
  cfg.per_task_dims = 3;
  cfg.redundant_dims = 6;
  cfg.label_noise = 0.05;
  cfg.feature_noise = 0.2;
  cfg.tasks = {{"a", 2, 160, 40, 80}, {"b", 3, 160, 40, 80}};
  cfg.metrics = {{MetricKind::macro_f1, {}, true},
                 {MetricKind::macro_recall, {}, true}};
  return cfg;
}

RunRecord quick_train(const MultiTaskDataset& ds, Method mode) {
  TrainConfig cfg;
  cfg.name = method_name(mode);
  cfg.objective.mode = mode;
  cfg.objective.alpha = mode == Method::infomtl ? 0.1 : 0.0;
  cfg.objective.beta = mode == Method::infomtl ? 0.01 : 0.0;
  cfg.epochs = 4;
  cfg.patience = 4;
  cfg.batch_size = 32;
  cfg.lr = 5e-3;
  cfg.dropout = 0.1;
  cfg.hidden = {16};
  cfg.repr_dim = 8;
  cfg.seed = 7;
  return train(ds, cfg);
}

}  // namespace

TEST_SUITE("robustness") {

TEST_CASE("gaussian perturbation: zero strength, exact norm, determinism") {
  RngStream rng(3);
  std::vector<double> v(6 * 5);
  for (double& x : v) x = rng.normal();
  Tensor x = Tensor::from_values({6, 5}, v);

  Tensor same = perturb_gaussian(x, 0.0, rng);
  CHECK(same.values() == x.values());

  for (double eps : {0.1, 1.0, 3.5}) {
    RngStream r(11);
    Tensor xt = perturb_gaussian(x, eps, r);
    for (int i = 0; i < 6; ++i) {
      double norm2 = 0.0;
      for (int c = 0; c < 5; ++c) {
        double d = xt.values()[static_cast<size_t>(i * 5 + c)] -
                   x.values()[static_cast<size_t>(i * 5 + c)];
        norm2 += d * d;
      }
      CHECK(std::sqrt(norm2) == doctest::Approx(eps).epsilon(1e-9));
    }
  }

  RngStream a(13), b(13);
  CHECK(perturb_gaussian(x, 0.5, a).values() ==
        perturb_gaussian(x, 0.5, b).values());
}

TEST_CASE("fgm direction matches the closed-form softplus gradient") {
  // loss = softplus(-y * <w, x>): dloss/dx = sigmoid(-y w.x) * (-y w)
  std::vector<double> w = {0.6, -1.1, 0.4};
  double y = 1.0;
  Tensor x = Tensor::from_values({1, 3}, {0.2, 0.1, -0.3});
  auto loss_fn = [&](const Tensor& leaf) {
    Tensor wt = Tensor::from_values({3, 1}, w);
    return sum_all(softplus(scale(matmul(leaf, wt), -y)));
  };
  double eps = 0.25;
  FgmResult res = fgm_with_loss(x, loss_fn, eps);
  REQUIRE(res.zero_grad_rows == 0);

  double wnorm = std::sqrt(0.6 * 0.6 + 1.1 * 1.1 + 0.4 * 0.4);
  for (int c = 0; c < 3; ++c) {
    double moved = res.x_tilde.values()[static_cast<size_t>(c)] -
                   x.values()[static_cast<size_t>(c)];
    double expected = eps * (-y * w[static_cast<size_t>(c)]) / wnorm;
    CHECK(moved == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("fgm: exact perturbation norm and first-order ascent") {
  auto ds = generate_synthetic(robust_config(19));
  RunRecord run = quick_train(ds, Method::ew);
  const Split& test = ds.data[0].test;
  Tensor x = ds.split_features(0, test);

  double eps = 1e-3;
  FgmResult res = perturb_fgm(x, test.labels, 0, run.model, eps);
  int n = x.rows(), d = x.cols();
  for (int i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (int c = 0; c < d; ++c) {
      double diff = res.x_tilde.values()[static_cast<size_t>(i * d + c)] -
                    x.values()[static_cast<size_t>(i * d + c)];
      norm2 += diff * diff;
    }
    if (std::sqrt(norm2) > 0.0) {
      CHECK(std::sqrt(norm2) == doctest::Approx(eps).epsilon(1e-9));
    }
  }

  auto per_example_loss = [&](const Tensor& feats) {
    Tensor z = run.model.encode(feats, nullptr, false);
    Tensor logits = run.model.head_logits(z, 0);
    return per_example_ce(logits, test.labels);
  };
  Tensor clean = per_example_loss(x);
  Tensor pert = per_example_loss(res.x_tilde);
  int ascended = 0;
  for (int i = 0; i < n; ++i) {
    if (pert.values()[static_cast<size_t>(i)] >=
        clean.values()[static_cast<size_t>(i)] - 1e-12) {
      ++ascended;
    }
  }
  CHECK(static_cast<double>(ascended) / n >= 0.95);
}

TEST_CASE("fgm leaves model parameters bitwise unchanged") {
  auto ds = generate_synthetic(robust_config(23));
  RunRecord run = quick_train(ds, Method::infomtl);
  std::vector<std::vector<double>> before;
  for (const auto& p : run.model.parameters()) before.push_back(p.values());
  Tensor x = ds.split_features(1, ds.data[1].test);
  perturb_fgm(x, ds.data[1].test.labels, 1, run.model, 0.5);
  auto params = run.model.parameters();
  for (size_t i = 0; i < params.size(); ++i) {
    CHECK(params[i].values() == before[i]);
    CHECK_FALSE(params[i].has_grad());
  }
}

TEST_CASE("robust evaluation: anchors, ranges, chance-level collapse") {
  auto ds = generate_synthetic(robust_config(29));
  RunRecord run = quick_train(ds, Method::ew);

  // mean feature norm sets the "very large" strength
  double mean_norm = 0.0;
  const Split& t0 = ds.data[0].test;
  for (int i = 0; i < t0.n(); ++i) {
    double norm2 = 0.0;
    for (int c = 0; c < ds.dx; ++c) {
      double v = t0.features[static_cast<size_t>(i * ds.dx + c)];
      norm2 += v * v;
    }
    mean_norm += std::sqrt(norm2);
  }
  mean_norm /= t0.n();

  PerturbSpec spec;
  spec.kind = PerturbKind::gaussian;
  spec.epsilons = {0.0, 0.5, 100.0 * mean_norm};
  spec.seed = 5;
  RobustReport report = robust_evaluate(run.model, ds, spec);

  auto clean = evaluate_split(run.model, ds, SplitKind::test);
  for (int t = 0; t < 2; ++t) {
    CHECK(report.scores[static_cast<size_t>(t)][0] == clean[static_cast<size_t>(t)][0]);
    for (double s : report.scores[static_cast<size_t>(t)]) {
      CHECK(s >= 0.0);
      CHECK(s <= 100.0);
    }
  }

  // macro-recall with label-independent predictions has expectation 100/C
  double collapsed = report.scores[1][2];
  CHECK(std::abs(collapsed - 100.0 / 3.0) <= 5.0);

  // csv is plot-ready long format
  std::string csv = report.to_csv("ew");
  CHECK(csv.find("method,kind,task,epsilon,score") != std::string::npos);
  CHECK(csv.find("ew,gaussian,a,0,") != std::string::npos);
}

TEST_CASE("spec validation: eps=0 anchor required, negatives rejected") {
  PerturbSpec no_zero;
  no_zero.epsilons = {0.5, 1.0};
  CHECK_THROWS_AS(no_zero.validate(), ConfigError);
  PerturbSpec negative;
  negative.epsilons = {0.0, -1.0};
  CHECK_THROWS_AS(negative.validate(), ConfigError);
  PerturbSpec ok;
  ok.validate();
}

TEST_CASE("fgm report flags zero-gradient rows instead of failing") {
  // constant loss: gradient is identically zero, rows stay put
  Tensor x = Tensor::from_values({3, 2}, {1, 2, 3, 4, 5, 6});
  auto loss_fn = [&](const Tensor& leaf) {
    return scale(sum_all(mul(leaf, Tensor::zeros({3, 2}))), 1.0);
  };
  FgmResult res = fgm_with_loss(x, loss_fn, 0.5);
  CHECK(res.zero_grad_rows == 3);
  CHECK(res.x_tilde.values() == x.values());
}

}  // TEST_SUITE
