#pragma once

// Black-Scholes option portfolios: outer scenarios under the real-world
// measure, the inner payoff mapping psi(u; omega), analytic loss oracles,
// threshold calibration and covariance factorizations.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlqmc/lds.h"

namespace mlqmc::market {

enum class OptionKind { put, call };

class DecompositionError : public std::runtime_error {
  public:
    DecompositionError(const std::string& what, int pivot) : std::runtime_error(what), pivot_(pivot) {}
    int pivot() const { return pivot_; }

  private:
    int pivot_;
};

/// Portfolio of European options, one per asset, sharing maturity and horizon.
/// Prices in currency units, rates per year, volatilities per sqrt(year).
struct Portfolio {
    std::vector<double> spot;         // S0
    std::vector<double> strike;       // K
    std::vector<OptionKind> kind;
    double drift = 0.0;               // real-world mu
    double rate = 0.0;                // risk-free mu0
    double maturity = 0.0;            // T
    double horizon = 0.0;             // tau
    Eigen::MatrixXd vol_factor;       // Sigma, covariance C = Sigma Sigma^T

    int dim() const { return static_cast<int>(spot.size()); }
    /// sqrt(sum_j sigma_ij^2) for asset i.
    double asset_vol(int i) const { return vol_factor.row(i).norm(); }
    Eigen::MatrixXd covariance() const { return vol_factor * vol_factor.transpose(); }

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

/// Single put of the one-asset experiment: S0=100, K=95, mu=8%, mu0=3%,
/// sigma=20%, T=0.25, tau=1/52.
Portfolio single_put_portfolio();

/// d calls with S0=100, K=95, mu=8%, mu0=5%, T=0.1, tau=0.02 and a
/// Cholesky volatility factor of the given covariance.
Portfolio call_basket_portfolio(const Eigen::MatrixXd& covariance);

struct Scenario {
    std::vector<double> prices;  // S_tau
};

enum class FactorProvenance { cholesky, gpca, other };

/// A with A A^T = C, used to map standard normals into correlated shocks.
struct FactorMatrix {
    Eigen::MatrixXd a;
    FactorProvenance provenance = FactorProvenance::other;
};

/// ||A A^T - C||_F / ||C||_F.
double factor_residual(const FactorMatrix& f, const Eigen::MatrixXd& c);

double bs_price(double spot, double strike, double rate, double vol, double ttm, OptionKind kind);

/// Lower-triangular Cholesky factor. Throws DecompositionError naming the
/// first non-positive pivot.
FactorMatrix cholesky(const Eigen::MatrixXd& c);

enum class CovarianceKind { exponential, triangular };

/// exponential: 0.3 * 0.98^|i-j|; triangular: 0.3 * (d - |i-j|) / d.
Eigen::MatrixXd build_covariance(CovarianceKind kind, int d);

/// S_tau from d standard normals, drift mu.
Scenario sample_scenario(const Portfolio& p, std::span<const double> z);

/// Deterministic outer draw `index` of stream `stream`: d standard normals
/// from the counter-based generator keyed by `seed`, mapped to S_tau.
Scenario draw_scenario(const Portfolio& p, std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Discounted-payoff sample X = V0 - e^{-mu0 (T-tau)} sum_i payoff_i(S_T^i),
/// whose conditional mean given omega is the loss g(omega). Coordinates of u
/// are clamped to [2^-32, 1 - 2^-32] before the inverse normal.
double inner_payoff(const Portfolio& p, const FactorMatrix& a, const Scenario& omega, std::span<const double> u);

/// Gradient of psi with respect to the standard normal inputs z (u = Phi(z)).
/// Payoff kinks use the subgradient 0.
Eigen::VectorXd inner_payoff_gradient(const Portfolio& p, const FactorMatrix& a, const Scenario& omega,
                                      std::span<const double> z);

/// Batch evaluator of psi for many inner points at one scenario. Holds the
/// per-portfolio constants; not thread safe (owns scratch storage).
class PayoffEvaluator {
  public:
    PayoffEvaluator(const Portfolio& p, const FactorMatrix& a);

    void set_scenario(const Scenario& omega);

    /// `normals` holds m rows of d standard normals (row major); writes the m
    /// values of psi into `out`.
    void evaluate(std::span<const double> normals, std::span<double> out);

    double initial_value() const { return v0_; }
    int dim() const { return d_; }

  private:
    int d_;
    double v0_;
    double discount_;
    Eigen::MatrixXd scaled_factor_;  // sqrt(T - tau) * A
    std::vector<double> risk_neutral_drift_;
    std::vector<double> strike_;
    std::vector<char> is_call_;
    std::vector<double> log_base_;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> shocks_;
};

/// Clamp applied to uniforms before the inverse normal.
inline constexpr double kMinUniform = 0x1p-32;
inline constexpr double kMaxUniform = 1.0 - 0x1p-32;

/// V0 = sum of time-0 Black-Scholes prices.
double initial_value(const Portfolio& p);

/// g(omega) = V0 - sum_i bs_price(omega_i, K_i, mu0, vol_i, T - tau).
double exact_loss(const Portfolio& p, const Scenario& omega);

/// Threshold c with P[g(omega) > c] = target_prob (one asset, analytic), or
/// threshold_fraction * V0 for multi-asset portfolios.
double calibrate_threshold(const Portfolio& p, double target_prob, double threshold_fraction = 0.2);

/// P[g(omega) > c] for a one-asset portfolio, analytically.
double loss_probability(const Portfolio& p, double c);

/// Eigenpairs of a symmetric PSD matrix, eigenvalues descending.
struct PrincipalAxes {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};
PrincipalAxes principal_axes(const Eigen::MatrixXd& g);

/// Gradient PCA: G = mean of grad grad^T over the pilot draws, eigendecomposed
/// as U Lambda U^T; returns A = L U, which preserves A A^T = C.
FactorMatrix gpca_rotation(const Portfolio& p, const FactorMatrix& l, std::span<const Scenario> pilot_scenarios,
                           const lds::PointBlock& pilot_points);

/// Rotation from an arbitrary gradient sample (rows are gradients in z).
FactorMatrix gpca_from_gradients(const FactorMatrix& l, const Eigen::MatrixXd& gradients);

/// Pilot design used by the tools: `scenarios` outer draws and `points`
/// scrambled Sobol' points, all derived from `seed`.
FactorMatrix gpca_factor(const Portfolio& p, const FactorMatrix& l, std::uint64_t seed, int scenarios = 64,
                         int points = 64);

/// Portfolio file: flat `key = value` lines, `#` comments. Keys: d, s0, mu,
/// mu0, strikes, maturity, tau, option_kind, covariance
/// (exponential|triangular|diagonal|file), volatility (diagonal only),
/// covariance_file (file only, relative to `base_dir`).
Portfolio parse_portfolio(std::istream& in, const std::string& base_dir);
Portfolio load_portfolio(const std::string& path);

}  // namespace mlqmc::market
