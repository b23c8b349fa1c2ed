#pragma once

#include <functional>
#include <string>
#include <vector>

#include "infomtl/tensor.hpp"

namespace infomtl {

struct FdViolation {
  size_t param_index;
  size_t coord;
  double analytic;
  double numeric;
  double rel_error;
};

struct FdReport {
  double max_rel_error = 0.0;
  size_t checked_coords = 0;
  std::vector<FdViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// Central-difference gradient oracle. `f` must be a deterministic pure
// forward evaluation of the loss at the *current* parameter values (stochastic
// layers frozen by re-seeding inside f); `analytic_grads` are the tape
// gradients being checked, one flat vector per parameter, in `params` order.
// The check perturbs each coordinate by ±step, restores it, and compares
// (f+ - f-) / (2 step) against the analytic value. Relative error uses
// max(|numeric|, |analytic|, 1e-6) as the denominator. Throws ConfigError if
// two evaluations of f at the base point disagree (f is not deterministic).
FdReport finite_difference_check(const std::function<double()>& f,
                                 std::vector<Tensor> params,
                                 const std::vector<std::vector<double>>& analytic_grads,
                                 double step, double tolerance);

}  // namespace infomtl
