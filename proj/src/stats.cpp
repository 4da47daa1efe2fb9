#include "confpose/stats.hpp"

#include <cmath>

#include "confpose/core.hpp"
#include "confpose/error.hpp"

namespace confpose {

double chi_square_cdf(int dof, double x) {
  if (x <= 0.0) return 0.0;
  switch (dof) {
    case 1: return std::erf(std::sqrt(0.5 * x));
    case 2: return -std::expm1(-0.5 * x);
    case 3:
      return std::erf(std::sqrt(0.5 * x)) - std::sqrt(2.0 * x / kPi) * std::exp(-0.5 * x);
    default: fail(ErrorCode::InvalidArgument, "chi-square degrees of freedom must be 1, 2 or 3");
  }
}

double chi_square_quantile(int dof, double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::InvalidArgument, "probability must lie in (0, 1)");
  if (dof == 2) return -2.0 * std::log1p(-p);
  double lo = 0.0, hi = 1.0;
  while (chi_square_cdf(dof, hi) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi_square_cdf(dof, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace confpose
