#include <cmath>
#include <stdexcept>
#include <vector>

#include "mlqmc/driver.h"

namespace mlqmc::driver {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: needs >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return fit;
}

namespace {

template <class F>
Rate fit_rate(std::span<const LevelStats> levels, const coupling::LevelSchedule& schedule, double sign, F value) {
    std::vector<double> x, y;
    for (const auto& s : levels) {
        if (s.level < 1 || s.count == 0) continue;
        const double v = value(s);
        if (!(v > 0.0) || !std::isfinite(v)) continue;
        x.push_back(std::log2(static_cast<double>(schedule.inner_samples(s.level))));
        y.push_back(std::log2(v));
    }
    Rate r;
    if (x.size() < 2) return r;
    const auto fit = fit_line(x, y);
    r.value = sign * fit.slope;
    r.stderr_ = fit.slope_stderr;
    r.defined = true;
    return r;
}

}  // namespace

RateEstimates estimate_rates(std::span<const LevelStats> levels, const coupling::LevelSchedule& schedule) {
    RateEstimates r;
    r.alpha = fit_rate(levels, schedule, -1.0, [](const LevelStats& s) { return std::abs(s.mean()); });
    r.beta = fit_rate(levels, schedule, -1.0, [](const LevelStats& s) { return s.variance(); });
    r.gamma = fit_rate(levels, schedule, 1.0, [](const LevelStats& s) { return s.cost_per_sample(); });
    return r;
}

}  // namespace mlqmc::driver
