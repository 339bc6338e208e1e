#pragma once

namespace fgray {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile, accurate to about 1e-12 on (0, 1).
double normal_quantile(double prob);

/// 2 (1 - Phi(|z|)).
double two_sided_p(double z);

} // namespace fgray
