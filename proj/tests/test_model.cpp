#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "infomtl/checkpoint.hpp"
#include "infomtl/gradcheck.hpp"
#include "infomtl/losses.hpp"
#include "infomtl/model.hpp"

using namespace infomtl;

namespace {

Tensor gaussian_batch(int n, int d, uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> v(static_cast<size_t>(n) * static_cast<size_t>(d));
  for (double& x : v) x = rng.normal();
  return Tensor::from_values({n, d}, std::move(v));
}

ModelState toy_model(Method mode, double dropout, uint64_t seed = 3) {
  return ModelState::create(mode, 8, {6}, 4, {3, 2}, dropout, RngStream(seed));
}

// pins the stochastic head so mu and logvar are constants wrt z
void pin_head(StochasticHead& h, const std::vector<double>& mu,
              const std::vector<double>& logvar) {
  auto zero = [](Tensor& t) {
    for (double& v : t.mutable_values()) v = 0.0;
  };
  zero(h.mu_hidden.W);
  for (double& v : h.mu_hidden.b.mutable_values()) v = 1.0;
  zero(h.mu_out.W);
  h.mu_out.b.mutable_values() = mu;
  zero(h.lv_hidden.W);
  for (double& v : h.lv_hidden.b.mutable_values()) v = 1.0;
  zero(h.lv_out.W);
  h.lv_out.b.mutable_values() = logvar;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("encode: p=0 makes both passes identical") {
  ModelState m = toy_model(Method::ew, 0.0);
  Tensor x = gaussian_batch(5, 8, 11);
  RngStream rng(1);
  Tensor z = m.encode(x, &rng, true);
  Tensor zpos = m.encode(x, &rng, true);
  REQUIRE(z.size() == zpos.size());
  for (int64_t i = 0; i < z.size(); ++i) {
    CHECK(z.values()[static_cast<size_t>(i)] ==
          zpos.values()[static_cast<size_t>(i)]);
  }
}

TEST_CASE("encode: p>0 gives distinct passes, reproducible under one seed") {
  ModelState m = toy_model(Method::ew, 0.2);
  Tensor x = gaussian_batch(5, 8, 12);
  auto run = [&]() {
    RngStream rng(77);
    Tensor z = m.encode(x, &rng, true);
    Tensor zpos = m.encode(x, &rng, true);
    return std::make_pair(z.values(), zpos.values());
  };
  auto [z1, p1] = run();
  auto [z2, p2] = run();
  CHECK(z1 == z2);
  CHECK(p1 == p2);
  CHECK(z1 != p1);  // independent masks separate the passes
}

TEST_CASE("encode: own positive beats cross positives on average") {
  // hidden width 32 keeps the all-dropped-row probability negligible
  ModelState m = ModelState::create(Method::ew, 8, {32}, 4, {3, 2}, 0.2,
                                    RngStream(5));
  const int B = 64;
  Tensor x = gaussian_batch(B, 8, 13);
  RngStream rng(9);
  Tensor z = m.encode(x, &rng, true);
  Tensor zpos = m.encode(x, &rng, true);
  Tensor sims = cosine_similarity_matrix(z, zpos);
  double own = 0.0, cross = 0.0;
  for (int i = 0; i < B; ++i) {
    for (int j = 0; j < B; ++j) {
      double v = sims.values()[static_cast<size_t>(i * B + j)];
      (i == j ? own : cross) += v;
    }
  }
  own /= B;
  cross /= static_cast<double>(B) * (B - 1);
  CHECK(own > cross);
}

TEST_CASE("head_logits: zero head gives uniform softmax, affine arithmetic") {
  ModelState m = toy_model(Method::ew, 0.0);
  auto& head = m.det_heads[0];
  for (double& v : head.out.W.mutable_values()) v = 0.0;
  for (double& v : head.out.b.mutable_values()) v = 0.0;
  Tensor z = gaussian_batch(3, 4, 14);
  Tensor logits = m.head_logits(z, 0);
  for (double v : logits.values()) CHECK(v == 0.0);
  Tensor sm = softmax_rows(logits);
  for (double v : sm.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // identity-like 2x2: z=(1,0) -> logits (1,0)
  ModelState m2 = ModelState::create(Method::ew, 8, {6}, 2, {2, 2}, 0.0,
                                     RngStream(4));
  auto& h2 = m2.det_heads[1];
  h2.out.W.mutable_values() = {1.0, 0.0, 0.0, 1.0};
  for (double& v : h2.out.b.mutable_values()) v = 0.0;
  Tensor z2 = Tensor::from_values({1, 2}, {1.0, 0.0});
  Tensor l2 = m2.head_logits(z2, 1);
  CHECK(l2.values()[0] == 1.0);
  CHECK(l2.values()[1] == 0.0);

  // shape contract
  Tensor l3 = m.head_logits(gaussian_batch(3, 4, 15), 0);
  CHECK(l3.rows() == 3);
  CHECK(l3.cols() == 3);
}

TEST_CASE("missing heads raise") {
  ModelState det = toy_model(Method::ew, 0.0);
  ModelState sto = toy_model(Method::infomtl, 0.0);
  Tensor z = gaussian_batch(2, 4, 16);
  CHECK_THROWS_AS(det.stochastic_forward(z, 0, nullptr, SampleMode::mean),
                  ConfigError);
  CHECK_THROWS_AS(sto.head_logits(z, 0), ConfigError);
}

TEST_CASE("stochastic forward: mean mode exact, sample mode near mu at clamp floor") {
  ModelState m = toy_model(Method::infomtl, 0.0);
  std::vector<double> mu = {0.8, -1.2, 0.5};
  pin_head(m.sto_heads[0], mu, {-20.0, -20.0, -20.0});  // clamps to -10
  Tensor z = gaussian_batch(4, 4, 17);

  auto mean_fwd = m.stochastic_forward(z, 0, nullptr, SampleMode::mean);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 3; ++c) {
      CHECK(mean_fwd.z_t.values()[static_cast<size_t>(r * 3 + c)] ==
            mu[static_cast<size_t>(c)]);
      CHECK(mean_fwd.logvar.values()[static_cast<size_t>(r * 3 + c)] == -10.0);
    }
  }

  RngStream rng(21);
  auto sample_fwd = m.stochastic_forward(z, 0, &rng, SampleMode::sample);
  double bound = 3.0 * std::exp(-5.0);  // three sigma at the clamp floor
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 3; ++c) {
      double diff = sample_fwd.z_t.values()[static_cast<size_t>(r * 3 + c)] -
                    mu[static_cast<size_t>(c)];
      CHECK(std::abs(diff) < bound);
    }
  }

  // seeded determinism
  RngStream rng2(21);
  auto again = m.stochastic_forward(z, 0, &rng2, SampleMode::sample);
  CHECK(again.z_t.values() == sample_fwd.z_t.values());
}

TEST_CASE("sample statistics match mu and exp(logvar)") {
  ModelState m = toy_model(Method::infomtl, 0.0);
  std::vector<double> mu = {0.8, -1.2, 0.5};
  std::vector<double> lv = {0.3, -0.4, 0.0};
  pin_head(m.sto_heads[0], mu, lv);
  Tensor z = gaussian_batch(1, 4, 18);
  RngStream rng(31);
  const int N = 100000;
  std::vector<double> acc(3, 0.0), acc2(3, 0.0);
  for (int i = 0; i < N; ++i) {
    auto sf = m.stochastic_forward(z, 0, &rng, SampleMode::sample);
    for (int c = 0; c < 3; ++c) {
      double v = sf.z_t.values()[static_cast<size_t>(c)];
      acc[static_cast<size_t>(c)] += v;
      acc2[static_cast<size_t>(c)] += v * v;
    }
  }
  for (int c = 0; c < 3; ++c) {
    double mean = acc[static_cast<size_t>(c)] / N;
    double var = acc2[static_cast<size_t>(c)] / N - mean * mean;
    CHECK(std::abs(mean - mu[static_cast<size_t>(c)]) <
          0.01 * std::abs(mu[static_cast<size_t>(c)]));
    CHECK(std::abs(var - std::exp(lv[static_cast<size_t>(c)])) <
          0.02 * std::exp(lv[static_cast<size_t>(c)]));
  }
}

TEST_CASE("reparameterization gradients match finite differences") {
  ModelState m = toy_model(Method::infomtl, 0.0);
  Tensor x = gaussian_batch(4, 8, 19);
  std::vector<int> labels = {0, 2, 1, 0};
  auto params = m.parameters();

  auto loss_value = [&]() {
    RngStream sample(1234);  // frozen eps via reseeding
    Tensor z = m.encode(x, nullptr, false);
    auto sf = m.stochastic_forward(z, 0, &sample, SampleMode::sample);
    Tensor ce = cross_entropy(sf.z_t, labels);
    Tensor kl = kl_diag_gaussian(sf.mu, sf.logvar);
    return add(ce, scale(kl, 0.5));
  };

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = loss_value();
    tape.backward(loss);
    for (auto& p : params) {
      analytic.push_back(p.has_grad()
                             ? p.grad()
                             : std::vector<double>(p.values().size(), 0.0));
    }
  }
  auto f = [&]() { return loss_value().item(); };
  auto report = finite_difference_check(f, params, analytic, 1e-5, 1e-4);
  CHECK_MESSAGE(report.ok(), report.summary());
}

TEST_CASE("Markov chain shape contract x->z->z_t->yhat") {
  ModelState m = toy_model(Method::infomtl, 0.0);
  const int B = 7;
  Tensor x = gaussian_batch(B, 8, 20);
  Tensor z = m.encode(x, nullptr, false);
  CHECK(z.rows() == B);
  CHECK(z.cols() == 4);
  auto sf = m.stochastic_forward(z, 0, nullptr, SampleMode::mean);
  CHECK(sf.z_t.rows() == B);
  CHECK(sf.z_t.cols() == 3);
  Tensor yhat = softmax_rows(sf.z_t);
  for (int r = 0; r < B; ++r) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      double v = yhat.values()[static_cast<size_t>(r * 3 + c)];
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mode decides the head set") {
  ModelState det = toy_model(Method::simax_only, 0.2);
  CHECK(det.det_heads.size() == 2);
  CHECK(det.sto_heads.empty());
  ModelState sto = toy_model(Method::timin_only, 0.2);
  CHECK(sto.sto_heads.size() == 2);
  CHECK(sto.det_heads.empty());
}

TEST_CASE("checkpoint round-trip is bitwise exact") {
  ModelState m = toy_model(Method::infomtl, 0.2, 99);
  std::vector<std::pair<std::string, Tensor>> extra;
  extra.emplace_back("weighting.s0",
                     Tensor::from_values({1}, {0.375}, true));
  auto dir = std::filesystem::temp_directory_path() / "imtl_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir, m, extra, 4242);
  Checkpoint ck = load_checkpoint(dir);
  CHECK(ck.seed == 4242);
  CHECK(ck.model.mode == Method::infomtl);
  auto a = m.named_parameters();
  auto b = ck.model.named_parameters();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.values() == b[i].second.values());
  }
  REQUIRE(ck.extra.size() == 1);
  CHECK(ck.extra[0].second.values()[0] == 0.375);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
