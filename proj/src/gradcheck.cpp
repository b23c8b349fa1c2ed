#include "infomtl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "infomtl/common.hpp"

namespace infomtl {

std::string FdReport::summary() const {
  std::ostringstream os;
  os << "fd-check: " << checked_coords << " coords, max rel error "
     << max_rel_error << ", " << violations.size() << " violation(s)";
  return os.str();
}

FdReport finite_difference_check(
    const std::function<double()>& f, std::vector<Tensor> params,
    const std::vector<std::vector<double>>& analytic_grads, double step,
    double tolerance) {
  IMTL_CHECK(params.size() == analytic_grads.size(),
             "fd-check: one analytic gradient per parameter required");
  IMTL_CHECK(step > 0.0, "fd-check: step must be positive");

  double base1 = f();
  double base2 = f();
  IMTL_CHECK(base1 == base2,
             "fd-check: f is not deterministic under the fixed seed");

  FdReport report;
  for (size_t p = 0; p < params.size(); ++p) {
    auto& vals = params[p].mutable_values();
    const auto& grads = analytic_grads[p];
    IMTL_CHECK(grads.size() == vals.size(),
               "fd-check: gradient size mismatch for parameter " +
                   std::to_string(p));
    for (size_t i = 0; i < vals.size(); ++i) {
      double saved = vals[i];
      vals[i] = saved + step;
      double fp = f();
      vals[i] = saved - step;
      double fm = f();
      vals[i] = saved;
      double numeric = (fp - fm) / (2.0 * step);
      double analytic = grads[i];
      double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      double rel = std::abs(numeric - analytic) / denom;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.checked_coords;
      if (rel > tolerance) {
        report.violations.push_back({p, i, analytic, numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace infomtl
