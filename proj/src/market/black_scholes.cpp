#include <cmath>
#include <stdexcept>

#include "mlqmc/lds.h"
#include "mlqmc/market.h"

namespace mlqmc::market {

double bs_price(double spot, double strike, double rate, double vol, double ttm, OptionKind kind) {
    if (!(spot > 0.0) || !(strike > 0.0) || !(ttm > 0.0)) {
        throw std::domain_error("bs_price: spot, strike and time to maturity must be positive");
    }
    if (!(vol >= 0.0)) throw std::domain_error("bs_price: volatility must be non-negative");

    const double discounted_strike = strike * std::exp(-rate * ttm);
    const double sd = vol * std::sqrt(ttm);
    if (sd == 0.0) {
        const double forward_intrinsic = spot - discounted_strike;
        return kind == OptionKind::call ? std::max(forward_intrinsic, 0.0) : std::max(-forward_intrinsic, 0.0);
    }
    const double d1 = (std::log(spot / strike) + (rate + 0.5 * vol * vol) * ttm) / sd;
    const double d2 = d1 - sd;
    if (kind == OptionKind::call) {
        return spot * lds::normal_cdf(d1) - discounted_strike * lds::normal_cdf(d2);
    }
    return discounted_strike * lds::normal_cdf(-d2) - spot * lds::normal_cdf(-d1);
}

}  // namespace mlqmc::market
