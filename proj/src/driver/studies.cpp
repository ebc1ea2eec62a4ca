#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mlqmc/driver.h"
#include "mlqmc/philox.h"

namespace mlqmc::driver {

namespace {

constexpr std::uint64_t kEtaPurpose = 0x657461ull;
constexpr std::uint64_t kSweepPurpose = 0x7377656570ull;

}  // namespace

ConvergenceStudy run_convergence_study(const market::Portfolio& p, const market::FactorMatrix& a,
                                       const coupling::CouplingConfig& config, int max_level,
                                       std::uint64_t n_per_level, std::uint64_t seed, unsigned threads,
                                       int batches) {
    if (max_level < 0) throw std::invalid_argument("run_convergence_study: max_level must be >= 0");
    if (batches < 1 || n_per_level < static_cast<std::uint64_t>(batches)) {
        throw std::invalid_argument("run_convergence_study: need n_per_level >= batches >= 1");
    }
    config.validate();
    const Problem problem{p, a, config};
    ConvergenceStudy study;
    for (int l = 0; l <= max_level; ++l) {
        std::vector<LevelStats> parts;
        LevelStats total;
        total.level = l;
        std::uint64_t first = 0;
        for (int b = 0; b < batches; ++b) {
            const std::uint64_t n = n_per_level / batches + (static_cast<std::uint64_t>(b) < n_per_level % batches);
            parts.push_back(draw_level(problem, l, first, n, seed, threads));
            total += parts.back();
            first += n;
        }
        study.levels.push_back(total);
        study.batches.push_back(std::move(parts));
    }
    study.rates = estimate_rates(study.levels, config.schedule);
    return study;
}

EtaStudy run_eta_study(const market::Portfolio& p, const market::FactorMatrix& a,
                       std::span<const market::Scenario> scenarios, std::span<const std::uint64_t> m_grid,
                       int replicates, std::uint64_t seed, coupling::InnerSampling inner) {
    if (replicates < 2) throw std::invalid_argument("run_eta_study: needs >= 2 replicates");
    if (m_grid.size() < 2) throw std::invalid_argument("run_eta_study: needs >= 2 grid points");
    for (std::size_t i = 0; i < m_grid.size(); ++i) {
        if (m_grid[i] == 0 || (i > 0 && m_grid[i] <= m_grid[i - 1])) {
            throw std::invalid_argument("run_eta_study: m_grid must be positive and increasing");
        }
    }
    coupling::CouplingConfig config;
    config.inner = inner;
    config.schedule.m0 = 1;
    coupling::LevelSampler sampler(config, p, a);
    const std::uint64_t m_max = m_grid.back();
    const std::uint64_t stream_seed = derive_seed(seed, kEtaPurpose);

    EtaStudy study;
    std::vector<double> psi(m_max);
    std::vector<std::vector<double>> g(m_grid.size(), std::vector<double>(replicates));
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        for (int r = 0; r < replicates; ++r) {
            const coupling::InnerStream stream{stream_seed, (static_cast<std::uint64_t>(s) << 24) | r};
            sampler.psi_values(m_max, scenarios[s], stream, psi);
            double sum = 0.0;
            std::size_t k = 0;
            for (std::uint64_t j = 0; j < m_max; ++j) {
                sum += psi[j];
                if (j + 1 == m_grid[k]) {
                    g[k][r] = sum / static_cast<double>(m_grid[k]);
                    ++k;
                }
            }
        }
        std::vector<double> var(m_grid.size());
        for (std::size_t k = 0; k < m_grid.size(); ++k) {
            const auto [lo, hi] = std::minmax_element(g[k].begin(), g[k].end());
            if (*lo == *hi) continue;
            double mean = 0.0;
            for (double x : g[k]) mean += x;
            mean /= replicates;
            double ss = 0.0;
            for (double x : g[k]) ss += (x - mean) * (x - mean);
            var[k] = ss / (replicates - 1);
        }
        study.variance.push_back(var);

        std::vector<double> x, y;
        for (std::size_t k = 0; k < m_grid.size(); ++k) {
            if (var[k] > 0.0) {
                x.push_back(std::log2(static_cast<double>(m_grid[k])));
                y.push_back(std::log2(var[k]));
            }
        }
        if (x.size() < 2) {
            study.per_scenario.emplace_back();
            continue;
        }
        const auto fit = fit_line(x, y);
        study.per_scenario.push_back(Rate{-fit.slope, fit.slope_stderr, true});
    }

    // Common slope with scenario-specific intercepts: center within scenarios.
    double sxx = 0.0, sxy = 0.0;
    std::size_t points = 0, groups = 0;
    std::vector<std::vector<std::pair<double, double>>> centered;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        if (!study.per_scenario[s]) continue;
        std::vector<std::pair<double, double>> pts;
        double mx = 0.0, my = 0.0;
        for (std::size_t k = 0; k < m_grid.size(); ++k) {
            if (study.variance[s][k] > 0.0) {
                pts.emplace_back(std::log2(static_cast<double>(m_grid[k])), std::log2(study.variance[s][k]));
                mx += pts.back().first;
                my += pts.back().second;
            }
        }
        mx /= static_cast<double>(pts.size());
        my /= static_cast<double>(pts.size());
        for (auto& [px, py] : pts) {
            px -= mx;
            py -= my;
            sxx += px * px;
            sxy += px * py;
        }
        points += pts.size();
        ++groups;
        centered.push_back(std::move(pts));
    }
    if (groups > 0 && sxx > 0.0) {
        const double slope = sxy / sxx;
        double rss = 0.0;
        for (const auto& pts : centered) {
            for (const auto& [px, py] : pts) rss += (py - slope * px) * (py - slope * px);
        }
        const double dof = static_cast<double>(points) - static_cast<double>(groups) - 1.0;
        study.pooled = Rate{-slope, dof > 0.0 ? std::sqrt(rss / dof / sxx) : 0.0, true};
    }
    return study;
}

std::vector<SweepCell> run_complexity_sweep(const market::Portfolio& p, std::span<const SweepEntry> entries,
                                            std::span<const double> eps_list, int repeats, std::uint64_t seed,
                                            double reference, const DriverOptions& options) {
    if (repeats < 1) throw std::invalid_argument("run_complexity_sweep: repeats must be >= 1");
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        if (!(eps_list[e] > 0.0)) throw std::invalid_argument("run_complexity_sweep: epsilon must be positive");
        if (e > 0 && eps_list[e] >= eps_list[e - 1]) {
            throw std::invalid_argument("run_complexity_sweep: eps list must be descending");
        }
    }
    std::vector<SweepCell> cells;
    for (const auto& entry : entries) {
        for (std::size_t e = 0; e < eps_list.size(); ++e) {
            SweepCell cell;
            cell.epsilon = eps_list[e];
            cell.coupling = entry.name;
            double cost = 0.0, sq = 0.0;
            for (int r = 0; r < repeats; ++r) {
                const std::uint64_t run_seed = derive_seed(derive_seed(seed, kSweepPurpose), e * 1000003ull + r);
                try {
                    const auto rep = run_mlmc(p, entry.factor, entry.config, eps_list[e], run_seed, options);
                    cost += rep.total_cost;
                    sq += (rep.estimate - reference) * (rep.estimate - reference);
                    cell.estimates.push_back(rep.estimate);
                    ++cell.converged_runs;
                } catch (const NonConvergence& err) {
                    if (cell.error.empty()) cell.error = err.what();
                }
            }
            if (cell.converged_runs > 0) {
                cell.mean_cost = cost / cell.converged_runs;
                cell.rmse = std::sqrt(sq / cell.converged_runs);
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

double complexity_slope(std::span<const SweepCell> cells, const std::string& coupling) {
    std::vector<double> x, y;
    for (const auto& c : cells) {
        if (c.coupling != coupling || c.converged_runs == 0 || !(c.mean_cost > 0.0)) continue;
        x.push_back(std::log(1.0 / c.epsilon));
        y.push_back(std::log(c.mean_cost));
    }
    return fit_line(x, y).slope;
}

}  // namespace mlqmc::driver
