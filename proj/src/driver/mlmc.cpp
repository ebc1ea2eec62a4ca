#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mlqmc/driver.h"

namespace mlqmc::driver {

std::vector<double> optimal_allocation(std::span<const double> variance, std::span<const double> cost,
                                       double epsilon) {
    if (variance.size() != cost.size()) throw std::invalid_argument("optimal_allocation: size mismatch");
    if (!(epsilon > 0.0)) throw std::invalid_argument("optimal_allocation: epsilon must be positive");
    double sum = 0.0;
    for (std::size_t l = 0; l < variance.size(); ++l) sum += std::sqrt(variance[l] * cost[l]);
    std::vector<double> n(variance.size());
    for (std::size_t l = 0; l < variance.size(); ++l) {
        n[l] = 2.0 / (epsilon * epsilon) * std::sqrt(variance[l] / cost[l]) * sum;
    }
    return n;
}

namespace {

void finish_report(MlmcReport& r, const coupling::CouplingConfig& config) {
    r.estimate = 0.0;
    r.total_cost = 0.0;
    double var = 0.0;
    for (const auto& s : r.stats) {
        r.estimate += s.mean();
        r.total_cost += s.cost;
        if (s.count > 0) var += s.variance() / static_cast<double>(s.count);
    }
    r.stderr_ = std::sqrt(var);
    r.levels = static_cast<int>(r.stats.size()) - 1;
    r.rates = estimate_rates(r.stats, config.schedule);
}

}  // namespace

MlmcReport run_mlmc(const market::Portfolio& p, const market::FactorMatrix& a, const coupling::CouplingConfig& config,
                    double epsilon, std::uint64_t seed, const DriverOptions& options) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("run_mlmc: epsilon must be positive");
    if (options.min_level < 0 || options.max_level < options.min_level) {
        throw std::invalid_argument("run_mlmc: need 0 <= min_level <= max_level");
    }
    if (options.warmup < 2) throw std::invalid_argument("run_mlmc: warm-up must be >= 2");
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const Problem problem{p, a, config};

    MlmcReport report;
    report.epsilon = epsilon;
    std::vector<std::uint64_t> extra(options.min_level + 1, options.warmup);
    for (int l = 0; l <= options.min_level; ++l) report.stats.push_back(LevelStats{.level = l});

    auto draw_extra = [&] {
        for (std::size_t l = 0; l < extra.size(); ++l) {
            if (extra[l] == 0) continue;
            report.stats[l] += draw_level(problem, static_cast<int>(l), report.stats[l].count, extra[l], seed,
                                          options.threads);
            extra[l] = 0;
        }
    };

    for (;;) {
        draw_extra();
        const std::size_t levels = report.stats.size();
        std::vector<double> v(levels), c(levels);
        for (std::size_t l = 0; l < levels; ++l) {
            v[l] = std::max(report.stats[l].variance(), std::numeric_limits<double>::min());
            c[l] = report.stats[l].cost_per_sample();
        }
        const auto target = optimal_allocation(v, c, epsilon);
        bool settled = true;
        for (std::size_t l = 0; l < levels; ++l) {
            const double have = static_cast<double>(report.stats[l].count);
            const double want = std::ceil(target[l]);
            extra[l] = want > have ? static_cast<std::uint64_t>(want - have) : 0;
            if (static_cast<double>(extra[l]) > 0.01 * have) settled = false;
        }
        if (!settled) continue;

        const int top = static_cast<int>(levels) - 1;
        const auto rates = estimate_rates(report.stats, config.schedule);
        const double alpha = std::max(options.alpha_floor, rates.alpha.defined ? rates.alpha.value : 0.0);
        // Remaining bias extrapolated from each of the last three coupled levels.
        double tail = 0.0;
        for (int k = 0; k < 3 && top - k >= 1; ++k) {
            tail = std::max(tail, std::abs(report.stats[top - k].mean()) * std::pow(2.0, -alpha * k));
        }
        const double bias = tail / (std::pow(2.0, alpha) - 1.0);
        if (bias <= epsilon / std::sqrt(2.0)) {
            draw_extra();
            break;
        }
        if (top >= options.max_level) {
            finish_report(report, config);
            report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            throw NonConvergence("run_mlmc: bias test still failing at max level " +
                                     std::to_string(options.max_level),
                                 std::move(report));
        }
        report.stats.push_back(LevelStats{.level = top + 1});
        extra.push_back(options.warmup);
    }

    finish_report(report, config);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace mlqmc::driver
