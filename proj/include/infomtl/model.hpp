#pragma once

#include <string>
#include <utility>
#include <vector>

#include "infomtl/method.hpp"
#include "infomtl/rng.hpp"
#include "infomtl/tensor.hpp"

namespace infomtl {

struct LinearLayer {
  Tensor W;  // {in, out}
  Tensor b;  // {out}
};

Tensor linear(const LinearLayer& layer, const Tensor& x);

// MLP encoder x -> z with ReLU hidden layers; dropout on each hidden
// activation is what generates the contrastive positive pass.
struct SharedEncoder {
  int input_dim = 0;
  int repr_dim = 0;
  std::vector<int> hidden;
  double dropout_p = 0.2;
  std::vector<LinearLayer> layers;

  Tensor forward(const Tensor& x, RngStream* dropout_rng, bool train) const;
};

struct DeterministicHead {
  LinearLayer out;  // d_z -> |Y_t|
};

// Variational head: two single-hidden-layer MLPs emit mu and log-variance in
// the task's output space R^{|Y_t|}.
struct StochasticHead {
  LinearLayer mu_hidden, mu_out;
  LinearLayer lv_hidden, lv_out;
};

inline constexpr double kLogVarClampLo = -10.0;
inline constexpr double kLogVarClampHi = 10.0;

enum class SampleMode { sample, mean };

struct StochasticForward {
  Tensor z_t;     // {B, |Y_t|}
  Tensor mu;      // {B, |Y_t|}
  Tensor logvar;  // {B, |Y_t|}, clamped to [-10, 10]
};

struct ModelState {
  Method mode = Method::ew;
  SharedEncoder encoder;
  std::vector<int> class_counts;
  std::vector<DeterministicHead> det_heads;  // present iff deterministic mode
  std::vector<StochasticHead> sto_heads;     // present iff stochastic mode

  static ModelState create(Method mode, int input_dim,
                           const std::vector<int>& hidden, int repr_dim,
                           const std::vector<int>& class_counts,
                           double dropout_p, RngStream init_rng);

  int num_tasks() const { return static_cast<int>(class_counts.size()); }

  // One encoder pass; fresh dropout masks are drawn from `dropout_rng` when
  // training, so calling twice yields (z, z+).
  Tensor encode(const Tensor& x, RngStream* dropout_rng, bool train) const;

  Tensor head_logits(const Tensor& z, int task) const;
  StochasticForward stochastic_forward(const Tensor& z, int task,
                                       RngStream* rng, SampleMode mode) const;

  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;

  ModelState deep_copy() const;
  void copy_values_from(const ModelState& other);
};

}  // namespace infomtl
