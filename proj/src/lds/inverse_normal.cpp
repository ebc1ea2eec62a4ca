#include <cmath>
#include <stdexcept>
#include <string>

#include "mlqmc/lds.h"

namespace mlqmc::lds {

namespace {

constexpr double kA[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                         1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
constexpr double kB[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                         6.680131188771972e+01,  -1.328068155288572e+01};
constexpr double kC[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                         -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
constexpr double kD[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                         3.754408661907416e+00};
constexpr double kLowBreak = 0.02425;
constexpr double kSqrt2Pi = 2.50662827463100050242;

// Lower half only: p in (0, 0.5].
double lower_quantile(double p) {
    double x;
    if (p < kLowBreak) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q + kC[5]) /
            ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((kA[0] * r + kA[1]) * r + kA[2]) * r + kA[3]) * r + kA[4]) * r + kA[5]) * q /
            (((((kB[0] * r + kB[1]) * r + kB[2]) * r + kB[3]) * r + kB[4]) * r + 1.0);
    }
    // Halley step on Phi(x) - p.
    const double e = 0.5 * std::erfc(-x * M_SQRT1_2) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace

double inverse_normal_cdf_unchecked(double u) {
    if (u > 0.5) return -lower_quantile(1.0 - u);
    return lower_quantile(u);
}

double inverse_normal_cdf(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        throw std::domain_error("inverse_normal_cdf: argument " + std::to_string(u) + " outside (0,1)");
    }
    return inverse_normal_cdf_unchecked(u);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

}  // namespace mlqmc::lds
