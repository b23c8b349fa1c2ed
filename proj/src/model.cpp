#include "infomtl/model.hpp"

#include <cmath>

#include "infomtl/common.hpp"

namespace infomtl {

std::string method_name(Method m) {
  switch (m) {
    case Method::infomtl: return "infomtl";
    case Method::simax_only: return "simax_only";
    case Method::timin_only: return "timin_only";
    case Method::ew: return "ew";
    case Method::tw: return "tw";
    case Method::si: return "si";
    case Method::uw: return "uw";
    case Method::gls: return "gls";
    case Method::dwa: return "dwa";
    case Method::rlw: return "rlw";
    case Method::imtl_l: return "imtl_l";
    case Method::pcgrad: return "pcgrad";
  }
  throw ConfigError("unknown method enum value");
}

Method method_from_name(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(Method::pcgrad); ++i) {
    Method m = static_cast<Method>(i);
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

bool uses_stochastic_heads(Method m) {
  return m == Method::infomtl || m == Method::timin_only;
}

bool is_weighting_baseline(Method m) {
  switch (m) {
    case Method::tw:
    case Method::si:
    case Method::uw:
    case Method::gls:
    case Method::dwa:
    case Method::rlw:
    case Method::imtl_l:
    case Method::pcgrad:
      return true;
    default:
      return false;
  }
}

Tensor linear(const LinearLayer& layer, const Tensor& x) {
  return add(matmul(x, layer.W), layer.b);
}

namespace {

LinearLayer init_linear(int in, int out, RngStream& rng, double bias = 0.0) {
  // Glorot uniform
  double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(static_cast<size_t>(in) * static_cast<size_t>(out));
  for (double& v : w) v = (2.0 * rng.uniform() - 1.0) * limit;
  LinearLayer l;
  l.W = Tensor::from_values({in, out}, std::move(w), true);
  l.b = Tensor::full({out}, bias, true);
  return l;
}

// Variational heads start near-deterministic (sigma = e^{-2}); the sampled
// prediction path is unusable when sigma ~ 1 swamps freshly initialized
// logits, and the KL pressure re-inflates sigma where the data allows.
constexpr double kLogVarBiasInit = -4.0;

void collect(const std::string& prefix, const LinearLayer& l,
             std::vector<std::pair<std::string, Tensor>>* out) {
  out->emplace_back(prefix + ".W", l.W);
  out->emplace_back(prefix + ".b", l.b);
}

}  // namespace

Tensor SharedEncoder::forward(const Tensor& x, RngStream* dropout_rng,
                              bool train) const {
  IMTL_CHECK(x.shape().size() == 2 && x.cols() == input_dim,
             "encoder: input must be {B," + std::to_string(input_dim) +
                 "}, got " + shape_str(x.shape()));
  Tensor h = x;
  for (size_t i = 0; i + 1 < layers.size(); ++i) {
    h = relu(linear(layers[i], h));
    if (train && dropout_p > 0.0) {
      IMTL_CHECK(dropout_rng != nullptr,
                 "encoder: training pass with dropout needs an rng stream");
      h = dropout(h, dropout_p, *dropout_rng);
    }
  }
  return linear(layers.back(), h);
}

ModelState ModelState::create(Method mode, int input_dim,
                              const std::vector<int>& hidden, int repr_dim,
                              const std::vector<int>& class_counts,
                              double dropout_p, RngStream init_rng) {
  IMTL_CHECK(input_dim > 0 && repr_dim > 0, "model: dims must be positive");
  IMTL_CHECK(!hidden.empty(), "model: encoder needs at least one hidden layer");
  IMTL_CHECK(!class_counts.empty(), "model: at least one task required");
  for (int c : class_counts) {
    IMTL_CHECK(c >= 2, "model: every task needs at least two classes");
  }
  IMTL_CHECK(dropout_p >= 0.0 && dropout_p < 1.0,
             "model: dropout must be in [0, 1)");

  ModelState m;
  m.mode = mode;
  m.class_counts = class_counts;
  m.encoder.input_dim = input_dim;
  m.encoder.repr_dim = repr_dim;
  m.encoder.hidden = hidden;
  m.encoder.dropout_p = dropout_p;

  int prev = input_dim;
  for (int h : hidden) {
    m.encoder.layers.push_back(init_linear(prev, h, init_rng));
    prev = h;
  }
  m.encoder.layers.push_back(init_linear(prev, repr_dim, init_rng));

  bool stochastic = uses_stochastic_heads(mode);
  for (int c : class_counts) {
    if (stochastic) {
      StochasticHead h;
      int head_hidden = 2 * repr_dim;
      h.mu_hidden = init_linear(repr_dim, head_hidden, init_rng);
      h.mu_out = init_linear(head_hidden, c, init_rng);
      h.lv_hidden = init_linear(repr_dim, head_hidden, init_rng);
      h.lv_out = init_linear(head_hidden, c, init_rng, kLogVarBiasInit);
      m.sto_heads.push_back(std::move(h));
    } else {
      DeterministicHead h;
      h.out = init_linear(repr_dim, c, init_rng);
      m.det_heads.push_back(std::move(h));
    }
  }
  return m;
}

Tensor ModelState::encode(const Tensor& x, RngStream* dropout_rng,
                          bool train) const {
  return encoder.forward(x, dropout_rng, train);
}

Tensor ModelState::head_logits(const Tensor& z, int task) const {
  IMTL_CHECK(task >= 0 && task < num_tasks(), "head_logits: task out of range");
  IMTL_CHECK(!det_heads.empty(),
             "head_logits: no deterministic head in mode '" +
                 method_name(mode) + "'");
  return linear(det_heads[static_cast<size_t>(task)].out, z);
}

StochasticForward ModelState::stochastic_forward(const Tensor& z, int task,
                                                 RngStream* rng,
                                                 SampleMode smode) const {
  IMTL_CHECK(task >= 0 && task < num_tasks(),
             "stochastic_forward: task out of range");
  IMTL_CHECK(!sto_heads.empty(),
             "stochastic_forward: no stochastic head in mode '" +
                 method_name(mode) + "'");
  const StochasticHead& h = sto_heads[static_cast<size_t>(task)];
  StochasticForward out;
  out.mu = linear(h.mu_out, tanh_op(linear(h.mu_hidden, z)));
  out.logvar = clamp(linear(h.lv_out, tanh_op(linear(h.lv_hidden, z))),
                     kLogVarClampLo, kLogVarClampHi);
  if (smode == SampleMode::mean) {
    out.z_t = out.mu;
    return out;
  }
  IMTL_CHECK(rng != nullptr, "stochastic_forward: sampling needs an rng");
  // reparameterization: z_t = mu + exp(logvar/2) * eps, eps constant wrt grads
  std::vector<double> eps(out.mu.values().size());
  for (double& e : eps) e = rng->normal();
  Tensor eps_t = Tensor::from_values(out.mu.shape(), std::move(eps));
  out.z_t = add(out.mu, mul(exp_op(scale(out.logvar, 0.5)), eps_t));
  return out;
}

std::vector<std::pair<std::string, Tensor>> ModelState::named_parameters()
    const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t i = 0; i < encoder.layers.size(); ++i) {
    collect("enc.l" + std::to_string(i), encoder.layers[i], &out);
  }
  for (size_t t = 0; t < det_heads.size(); ++t) {
    collect("det.t" + std::to_string(t), det_heads[t].out, &out);
  }
  for (size_t t = 0; t < sto_heads.size(); ++t) {
    std::string p = "sto.t" + std::to_string(t);
    collect(p + ".mu_hidden", sto_heads[t].mu_hidden, &out);
    collect(p + ".mu_out", sto_heads[t].mu_out, &out);
    collect(p + ".lv_hidden", sto_heads[t].lv_hidden, &out);
    collect(p + ".lv_out", sto_heads[t].lv_out, &out);
  }
  return out;
}

std::vector<Tensor> ModelState::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

ModelState ModelState::deep_copy() const {
  ModelState m = *this;  // shallow: shares tensor storage
  auto dup = [](LinearLayer& l) {
    l.W = l.W.deep_copy();
    l.b = l.b.deep_copy();
  };
  for (auto& l : m.encoder.layers) dup(l);
  for (auto& h : m.det_heads) dup(h.out);
  for (auto& h : m.sto_heads) {
    dup(h.mu_hidden);
    dup(h.mu_out);
    dup(h.lv_hidden);
    dup(h.lv_out);
  }
  return m;
}

void ModelState::copy_values_from(const ModelState& other) {
  auto mine = named_parameters();
  auto theirs = other.named_parameters();
  IMTL_CHECK(mine.size() == theirs.size(),
             "copy_values_from: parameter sets differ");
  for (size_t i = 0; i < mine.size(); ++i) {
    IMTL_CHECK(mine[i].first == theirs[i].first &&
                   mine[i].second.shape() == theirs[i].second.shape(),
               "copy_values_from: parameter mismatch at " + mine[i].first);
    mine[i].second.mutable_values() = theirs[i].second.values();
  }
}

}  // namespace infomtl
