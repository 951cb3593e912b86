#pragma once

namespace rareyield {

/// Standard normal CDF.
double normal_cdf(double x);

/// Upper tail 1 - Phi(x), accurate far into the tail.
double normal_sf(double x);

/// Inverse of normal_cdf for p in (0, 1).
double normal_quantile(double p);

}  // namespace rareyield
