#include "infomtl/adamax.hpp"

#include <cmath>

#include "infomtl/common.hpp"

namespace infomtl {

void adamax_step(AdamaxState& state, std::vector<Tensor>& params,
                 const std::vector<std::vector<double>>& grads) {
  IMTL_CHECK(params.size() == grads.size(),
             "adamax: gradient list must match parameter list");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.u.resize(params.size());
    for (size_t p = 0; p < params.size(); ++p) {
      state.m[p].assign(params[p].values().size(), 0.0);
      state.u[p].assign(params[p].values().size(), 0.0);
    }
  }
  state.step += 1;
  const auto& cfg = state.config;
  double bias = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  for (size_t p = 0; p < params.size(); ++p) {
    auto& vals = params[p].mutable_values();
    const auto& g = grads[p];
    IMTL_CHECK(g.size() == vals.size(), "adamax: gradient shape mismatch");
    auto& m = state.m[p];
    auto& u = state.u[p];
    for (size_t i = 0; i < vals.size(); ++i) {
      IMTL_CHECK_NUM(std::isfinite(g[i]), "adamax: non-finite gradient");
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      u[i] = std::max(cfg.beta2 * u[i], std::abs(g[i]));
      vals[i] -= cfg.lr / bias * m[i] / (u[i] + cfg.eps);
    }
  }
}

Adamax::Adamax(std::vector<Tensor> params, AdamaxConfig config)
    : params_(std::move(params)) {
  state_.config = config;
}

void Adamax::step() {
  std::vector<std::vector<double>> grads;
  grads.reserve(params_.size());
  for (auto& p : params_) {
    if (p.has_grad()) {
      grads.push_back(p.grad());
    } else {
      grads.emplace_back(p.values().size(), 0.0);
    }
  }
  adamax_step(state_, params_, grads);
}

void Adamax::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace infomtl
