#pragma once

#include <string>

namespace infomtl {

// Training method: the four objective modes plus the loss-weighting /
// gradient-surgery baselines (all baselines run plain cross-entropy through
// deterministic heads).
enum class Method {
  infomtl,
  simax_only,
  timin_only,
  ew,
  tw,
  si,
  uw,
  gls,
  dwa,
  rlw,
  imtl_l,
  pcgrad,
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// infomtl and timin_only predict through stochastic variational heads;
// everything else uses deterministic affine heads.
bool uses_stochastic_heads(Method m);

// true for the methods that combine per-task losses/gradients (tw..pcgrad)
bool is_weighting_baseline(Method m);

}  // namespace infomtl
