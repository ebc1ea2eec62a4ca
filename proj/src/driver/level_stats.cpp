#include <cmath>
#include <stdexcept>

#include "mlqmc/driver.h"

namespace mlqmc::driver {

double LevelStats::variance() const {
    if (count == 0) return 0.0;
    const double n = static_cast<double>(count);
    const double mu = sum1 / n;
    const double v = sum2 / n - mu * mu;
    // Cancellation leaves rounding residue when all draws are equal.
    if (v <= 1e-14 * (sum2 / n)) return 0.0;
    return v;
}

DerivedStats level_statistics(const LevelStats& stats) {
    if (stats.count < 4) throw std::invalid_argument("level_statistics: needs at least 4 draws");
    const double n = static_cast<double>(stats.count);
    DerivedStats out;
    out.mean = stats.mean();
    out.variance = stats.variance();
    if (out.variance == 0.0) return out;
    const double mu = out.mean;
    const double m4 = stats.sum4 / n - 4.0 * mu * stats.sum3 / n + 6.0 * mu * mu * stats.sum2 / n - 3.0 * mu * mu * mu * mu;
    const double kappa = m4 / (out.variance * out.variance);
    out.kurtosis = kappa;
    out.kvf = kappa * out.variance;
    out.variance_stderr = out.variance / std::sqrt(n) * std::sqrt(std::max(kappa - 1.0 + 2.0 / (n - 1.0), 0.0));
    return out;
}

}  // namespace mlqmc::driver
