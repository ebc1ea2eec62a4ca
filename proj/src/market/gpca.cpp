#include <Eigen/Eigenvalues>
#include <algorithm>
#include <stdexcept>

#include "mlqmc/lds.h"
#include "mlqmc/market.h"
#include "mlqmc/philox.h"

namespace mlqmc::market {

PrincipalAxes principal_axes(const Eigen::MatrixXd& g) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g);
    if (solver.info() != Eigen::Success) throw std::runtime_error("principal_axes: eigendecomposition failed");
    // Eigen sorts ascending.
    return {solver.eigenvalues().reverse(), solver.eigenvectors().rowwise().reverse()};
}

FactorMatrix gpca_from_gradients(const FactorMatrix& l, const Eigen::MatrixXd& gradients) {
    if (gradients.cols() != l.a.cols()) throw std::invalid_argument("gpca: gradient width differs from d");
    if (gradients.rows() == 0) throw std::invalid_argument("gpca: empty gradient sample");
    const Eigen::MatrixXd g = gradients.transpose() * gradients / static_cast<double>(gradients.rows());
    const auto axes = principal_axes(g);
    return {l.a * axes.vectors, FactorProvenance::gpca};
}

FactorMatrix gpca_rotation(const Portfolio& p, const FactorMatrix& l, std::span<const Scenario> pilot_scenarios,
                           const lds::PointBlock& pilot_points) {
    const int d = p.dim();
    if (static_cast<int>(pilot_scenarios.size()) < d || static_cast<int>(pilot_points.count) < d) {
        throw std::invalid_argument("gpca: pilot sizes must be at least d");
    }
    if (static_cast<int>(pilot_points.dimension) != d) throw std::invalid_argument("gpca: pilot points must be d-dimensional");

    Eigen::MatrixXd grads(pilot_scenarios.size() * pilot_points.count, d);
    std::vector<double> z(d);
    Eigen::Index row = 0;
    for (const auto& omega : pilot_scenarios) {
        for (std::size_t j = 0; j < pilot_points.count; ++j) {
            for (int k = 0; k < d; ++k) {
                z[k] = lds::inverse_normal_cdf(std::clamp(pilot_points(j, k), kMinUniform, kMaxUniform));
            }
            grads.row(row++) = inner_payoff_gradient(p, l, omega, z).transpose();
        }
    }
    return gpca_from_gradients(l, grads);
}

FactorMatrix gpca_factor(const Portfolio& p, const FactorMatrix& l, std::uint64_t seed, int scenarios, int points) {
    const std::uint64_t pilot_seed = derive_seed(seed, 0x67706361ull);
    std::vector<Scenario> omegas;
    omegas.reserve(scenarios);
    for (int i = 0; i < scenarios; ++i) omegas.push_back(draw_scenario(p, pilot_seed, 0, i));
    const auto& seq = lds::DigitalSequenceSpec::sobol(p.dim());
    const auto block = lds::generate_block(seq, 0, points, lds::BlockScramble{pilot_seed, 0});
    return gpca_rotation(p, l, omegas, block);
}

}  // namespace mlqmc::market
