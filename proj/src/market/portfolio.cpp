#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mlqmc/lds.h"
#include "mlqmc/market.h"
#include "mlqmc/philox.h"

namespace mlqmc::market {

namespace {

constexpr std::uint64_t kOuterPurpose = 0x6f75746572ull;

double payoff(double s, double k, OptionKind kind) {
    return kind == OptionKind::call ? std::max(s - k, 0.0) : std::max(k - s, 0.0);
}

double clamp_uniform(double u) { return std::clamp(u, kMinUniform, kMaxUniform); }

// Loss of a one-asset portfolio as a function of the scenario price.
double single_loss(const Portfolio& p, double price) { return exact_loss(p, Scenario{{price}}); }

// P[S_tau > x] under the real-world lognormal law.
double upper_tail(const Portfolio& p, double x) {
    const double vol = p.asset_vol(0);
    const double sd = vol * std::sqrt(p.horizon);
    const double z = (std::log(x / p.spot[0]) - (p.drift - 0.5 * vol * vol) * p.horizon) / sd;
    return lds::normal_cdf(-z);
}

// P[g(omega) > g(x)]: g increases with the price for a put, decreases for a call.
double tail_at_price(const Portfolio& p, double x) {
    const double up = upper_tail(p, x);
    return p.kind[0] == OptionKind::put ? up : 1.0 - up;
}

}  // namespace

void Portfolio::validate() const {
    const auto d = spot.size();
    if (d == 0) throw std::invalid_argument("portfolio needs at least one asset");
    if (strike.size() != d || kind.size() != d) {
        throw std::invalid_argument("portfolio: spot, strike and option kind lists differ in length");
    }
    if (vol_factor.rows() != static_cast<Eigen::Index>(d) || vol_factor.cols() != static_cast<Eigen::Index>(d)) {
        throw std::invalid_argument("portfolio: volatility factor must be d x d");
    }
    for (std::size_t i = 0; i < d; ++i) {
        if (!(spot[i] > 0.0) || !(strike[i] > 0.0)) {
            throw std::invalid_argument("portfolio: spot and strike of asset " + std::to_string(i + 1) +
                                        " must be positive");
        }
    }
    if (!(horizon > 0.0) || !(horizon < maturity)) {
        throw std::invalid_argument("portfolio: requires 0 < tau < T");
    }
    try {
        cholesky(covariance());
    } catch (const DecompositionError& e) {
        throw std::invalid_argument(std::string("portfolio: covariance is not positive definite (") + e.what() + ")");
    }
}

Portfolio single_put_portfolio() {
    Portfolio p;
    p.spot = {100.0};
    p.strike = {95.0};
    p.kind = {OptionKind::put};
    p.drift = 0.08;
    p.rate = 0.03;
    p.maturity = 0.25;
    p.horizon = 1.0 / 52.0;
    p.vol_factor = Eigen::MatrixXd::Constant(1, 1, 0.2);
    return p;
}

Portfolio call_basket_portfolio(const Eigen::MatrixXd& covariance) {
    const auto d = static_cast<std::size_t>(covariance.rows());
    Portfolio p;
    p.spot.assign(d, 100.0);
    p.strike.assign(d, 95.0);
    p.kind.assign(d, OptionKind::call);
    p.drift = 0.08;
    p.rate = 0.05;
    p.maturity = 0.1;
    p.horizon = 0.02;
    p.vol_factor = cholesky(covariance).a;
    return p;
}

Scenario sample_scenario(const Portfolio& p, std::span<const double> z) {
    const int d = p.dim();
    if (static_cast<int>(z.size()) != d) throw std::invalid_argument("sample_scenario: expected d normals");
    const double sqrt_tau = std::sqrt(p.horizon);
    Scenario s;
    s.prices.resize(d);
    for (int i = 0; i < d; ++i) {
        double shock = 0.0;
        for (int j = 0; j < d; ++j) shock += p.vol_factor(i, j) * z[j];
        const double vol = p.asset_vol(i);
        s.prices[i] = p.spot[i] * std::exp((p.drift - 0.5 * vol * vol) * p.horizon + sqrt_tau * shock);
    }
    return s;
}

Scenario draw_scenario(const Portfolio& p, std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    const int d = p.dim();
    const Philox4x32 gen(derive_seed(derive_seed(seed, kOuterPurpose), stream));
    std::vector<double> z(d);
    for (int i = 0; i < d; i += 2) {
        const auto w = gen({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                            static_cast<std::uint32_t>(i / 2), 0u});
        z[i] = lds::inverse_normal_cdf_unchecked(open_uniform52(w[0], w[1]));
        if (i + 1 < d) z[i + 1] = lds::inverse_normal_cdf_unchecked(open_uniform52(w[2], w[3]));
    }
    return sample_scenario(p, z);
}

double initial_value(const Portfolio& p) {
    double v0 = 0.0;
    for (int i = 0; i < p.dim(); ++i) {
        v0 += bs_price(p.spot[i], p.strike[i], p.rate, p.asset_vol(i), p.maturity, p.kind[i]);
    }
    return v0;
}

double exact_loss(const Portfolio& p, const Scenario& omega) {
    const double ttm = p.maturity - p.horizon;
    double value = 0.0;
    for (int i = 0; i < p.dim(); ++i) {
        value += bs_price(omega.prices[i], p.strike[i], p.rate, p.asset_vol(i), ttm, p.kind[i]);
    }
    return initial_value(p) - value;
}

double inner_payoff(const Portfolio& p, const FactorMatrix& a, const Scenario& omega, std::span<const double> u) {
    const int d = p.dim();
    const double h = p.maturity - p.horizon;
    const double sqrt_h = std::sqrt(h);
    std::vector<double> z(d);
    for (int k = 0; k < d; ++k) z[k] = lds::inverse_normal_cdf(clamp_uniform(u[k]));
    double total = 0.0;
    for (int i = 0; i < d; ++i) {
        double shock = 0.0;
        for (int k = 0; k < d; ++k) shock += a.a(i, k) * z[k];
        const double vol = p.asset_vol(i);
        const double s_t = omega.prices[i] * std::exp((p.rate - 0.5 * vol * vol) * h + sqrt_h * shock);
        total += payoff(s_t, p.strike[i], p.kind[i]);
    }
    return initial_value(p) - std::exp(-p.rate * h) * total;
}

Eigen::VectorXd inner_payoff_gradient(const Portfolio& p, const FactorMatrix& a, const Scenario& omega,
                                      std::span<const double> z) {
    const int d = p.dim();
    const double h = p.maturity - p.horizon;
    const double sqrt_h = std::sqrt(h);
    const Eigen::Map<const Eigen::VectorXd> zv(z.data(), d);
    const Eigen::VectorXd shock = a.a * zv;
    Eigen::VectorXd dpsi_dshock(d);
    for (int i = 0; i < d; ++i) {
        const double vol = p.asset_vol(i);
        const double s_t = omega.prices[i] * std::exp((p.rate - 0.5 * vol * vol) * h + sqrt_h * shock[i]);
        double slope = 0.0;  // d payoff / d log S
        if (p.kind[i] == OptionKind::call && s_t > p.strike[i]) slope = s_t;
        if (p.kind[i] == OptionKind::put && s_t < p.strike[i]) slope = -s_t;
        dpsi_dshock[i] = -std::exp(-p.rate * h) * slope * sqrt_h;
    }
    return a.a.transpose() * dpsi_dshock;
}

PayoffEvaluator::PayoffEvaluator(const Portfolio& p, const FactorMatrix& a)
    : d_(p.dim()), v0_(market::initial_value(p)), strike_(p.strike) {
    const double h = p.maturity - p.horizon;
    discount_ = std::exp(-p.rate * h);
    scaled_factor_ = std::sqrt(h) * a.a;
    risk_neutral_drift_.resize(d_);
    is_call_.resize(d_);
    for (int i = 0; i < d_; ++i) {
        const double vol = p.asset_vol(i);
        risk_neutral_drift_[i] = (p.rate - 0.5 * vol * vol) * h;
        is_call_[i] = p.kind[i] == OptionKind::call;
    }
    log_base_.resize(d_);
}

void PayoffEvaluator::set_scenario(const Scenario& omega) {
    for (int i = 0; i < d_; ++i) log_base_[i] = std::log(omega.prices[i]) + risk_neutral_drift_[i];
}

void PayoffEvaluator::evaluate(std::span<const double> normals, std::span<double> out) {
    const auto m = static_cast<Eigen::Index>(out.size());
    if (d_ == 1) {
        const double b = scaled_factor_(0, 0);
        const double base = log_base_[0];
        const double k = strike_[0];
        if (is_call_[0]) {
            for (Eigen::Index j = 0; j < m; ++j) {
                out[j] = v0_ - discount_ * std::max(std::exp(base + b * normals[j]) - k, 0.0);
            }
        } else {
            for (Eigen::Index j = 0; j < m; ++j) {
                out[j] = v0_ - discount_ * std::max(k - std::exp(base + b * normals[j]), 0.0);
            }
        }
        return;
    }
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMajor> z(normals.data(), m, d_);
    shocks_.resize(m, d_);
    shocks_.noalias() = z * scaled_factor_.transpose();
    for (Eigen::Index j = 0; j < m; ++j) {
        double total = 0.0;
        const double* row = shocks_.data() + j * d_;
        for (int i = 0; i < d_; ++i) {
            const double s_t = std::exp(log_base_[i] + row[i]);
            total += is_call_[i] ? std::max(s_t - strike_[i], 0.0) : std::max(strike_[i] - s_t, 0.0);
        }
        out[j] = v0_ - discount_ * total;
    }
}

double loss_probability(const Portfolio& p, double c) {
    if (p.dim() != 1) throw std::invalid_argument("loss_probability: analytic route needs a single asset");
    const double sd = p.asset_vol(0) * std::sqrt(p.horizon);
    double lo = std::log(p.spot[0]) - 40.0 * sd;
    double hi = std::log(p.spot[0]) + 40.0 * sd;
    const bool increasing = p.kind[0] == OptionKind::put;
    auto loss = [&](double log_x) { return single_loss(p, std::exp(log_x)); };
    // Orient so that loss grows from lo to hi.
    if (!increasing) std::swap(lo, hi);
    if (loss(lo) > c) return 1.0;
    if (loss(hi) <= c) return 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (loss(mid) > c ? hi : lo) = mid;
    }
    return tail_at_price(p, std::exp(0.5 * (lo + hi)));
}

double calibrate_threshold(const Portfolio& p, double target_prob, double threshold_fraction) {
    if (!(target_prob > 0.0 && target_prob < 1.0)) {
        throw std::domain_error("calibrate_threshold: target probability must lie in (0,1)");
    }
    if (p.dim() != 1) return threshold_fraction * initial_value(p);

    // Bisection over the scenario price; the tail probability is monotone in it
    // and the loss is a monotone transform of it.
    const double sd = p.asset_vol(0) * std::sqrt(p.horizon);
    double lo = std::log(p.spot[0]) - 10.0 * sd;
    double hi = std::log(p.spot[0]) + 10.0 * sd;
    auto excess = [&](double log_x) { return tail_at_price(p, std::exp(log_x)) - target_prob; };
    const double f_lo = excess(lo);
    const double f_hi = excess(hi);
    if (f_lo * f_hi > 0.0) throw std::runtime_error("calibrate_threshold: target probability not bracketed");
    const bool lo_positive = f_lo > 0.0;
    for (int it = 0; it < 200; ++it) {
        if (std::abs(single_loss(p, std::exp(hi)) - single_loss(p, std::exp(lo))) < 1e-8) break;
        const double mid = 0.5 * (lo + hi);
        ((excess(mid) > 0.0) == lo_positive ? lo : hi) = mid;
    }
    return single_loss(p, std::exp(0.5 * (lo + hi)));
}

}  // namespace mlqmc::market
