#pragma once

namespace confpose {

/// Chi-square CDF for 1, 2 or 3 degrees of freedom (closed forms).
double chi_square_cdf(int dof, double x);

/// Inverse of chi_square_cdf by bisection; p in (0, 1).
double chi_square_quantile(int dof, double p);

}  // namespace confpose
