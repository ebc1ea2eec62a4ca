#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "mlqmc/market.h"

namespace mlqmc::market {

FactorMatrix cholesky(const Eigen::MatrixXd& c) {
    const Eigen::Index d = c.rows();
    if (c.cols() != d) throw std::invalid_argument("cholesky: matrix is not square");
    if (!c.isApprox(c.transpose(), 1e-12)) throw std::invalid_argument("cholesky: matrix is not symmetric");

    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double pivot = c(j, j) - l.row(j).head(j).squaredNorm();
        if (!(pivot > 0.0)) {
            throw DecompositionError("cholesky: pivot " + std::to_string(j + 1) + " is " + std::to_string(pivot) +
                                         ", matrix is not positive definite",
                                     static_cast<int>(j));
        }
        l(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < d; ++i) {
            l(i, j) = (c(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
        }
    }
    return {std::move(l), FactorProvenance::cholesky};
}

Eigen::MatrixXd build_covariance(CovarianceKind kind, int d) {
    if (d < 1) throw std::invalid_argument("build_covariance: d must be >= 1");
    Eigen::MatrixXd c(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const int lag = std::abs(i - j);
            c(i, j) = kind == CovarianceKind::exponential ? 0.3 * std::pow(0.98, lag)
                                                          : 0.3 * static_cast<double>(d - lag) / d;
        }
    }
    return c;
}

double factor_residual(const FactorMatrix& f, const Eigen::MatrixXd& c) {
    return (f.a * f.a.transpose() - c).norm() / c.norm();
}

}  // namespace mlqmc::market
