#pragma once

// End-to-end estimators: uniform nested simulation, the adaptive MLMC loop,
// convergence-rate studies and per-level diagnostics.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlqmc/coupling.h"
#include "mlqmc/market.h"

namespace mlqmc::driver {

/// Power sums of level draws. Fieldwise addition merges two batches.
struct LevelStats {
    int level = 0;
    std::uint64_t count = 0;
    double sum1 = 0.0, sum2 = 0.0, sum3 = 0.0, sum4 = 0.0;
    double cost = 0.0;

    void add(double y, double draw_cost) {
        const double y2 = y * y;
        ++count;
        sum1 += y;
        sum2 += y2;
        sum3 += y2 * y;
        sum4 += y2 * y2;
        cost += draw_cost;
    }
    LevelStats& operator+=(const LevelStats& o) {
        count += o.count;
        sum1 += o.sum1;
        sum2 += o.sum2;
        sum3 += o.sum3;
        sum4 += o.sum4;
        cost += o.cost;
        return *this;
    }
    double mean() const { return count ? sum1 / static_cast<double>(count) : 0.0; }
    /// Population variance (divides by N).
    double variance() const;
    double cost_per_sample() const { return count ? cost / static_cast<double>(count) : 0.0; }
};

/// Statistics derived from a LevelStats. Kurtosis-based fields are empty when
/// the sample variance is zero.
struct DerivedStats {
    double mean = 0.0;
    double variance = 0.0;
    std::optional<double> kurtosis;
    std::optional<double> kvf;
    /// Standard error of the variance estimate, (S^2/sqrt(N)) sqrt(kappa - 1 + 2/(N-1)).
    std::optional<double> variance_stderr;
};

/// Requires N >= 4 (std::invalid_argument otherwise).
DerivedStats level_statistics(const LevelStats& stats);

struct Rate {
    double value = 0.0;
    double stderr_ = 0.0;
    bool defined = false;
};

struct RateEstimates {
    Rate alpha;  // |E Y_l| ~ m_l^-alpha
    Rate beta;   // Var Y_l ~ m_l^-beta
    Rate gamma;  // cost ~ m_l^gamma
    Rate eta;    // Var g_hat_m ~ m^-eta
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

/// Ordinary least squares y = intercept + slope x (needs >= 2 points).
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Fits alpha, beta, gamma against log2 m_l over levels >= 1 (level 0 carries
/// no coupling). Levels whose mean or variance is zero are skipped for that rate.
RateEstimates estimate_rates(std::span<const LevelStats> levels, const coupling::LevelSchedule& schedule);

struct DriverOptions {
    unsigned threads = 1;
    std::uint64_t warmup = 10000;
    int min_level = 2;
    int max_level = 14;
    double alpha_floor = 0.5;
};

/// Fixed number of draws per work item; partitioning never depends on the
/// thread count, so merged sums are bit-identical for any worker count.
inline constexpr std::uint64_t kChunkDraws = 256;

/// The problem an estimator samples: portfolio, inner factor and coupling.
struct Problem {
    const market::Portfolio& portfolio;
    const market::FactorMatrix& factor;
    const coupling::CouplingConfig& config;
};

/// Draws `count` level-l samples with indices first .. first+count-1. Draw i
/// uses outer scenario (seed, level, i) and inner replicate (level << 40) | i.
LevelStats draw_level(const Problem& problem, int level, std::uint64_t first, std::uint64_t count,
                      std::uint64_t seed, unsigned threads);

/// Same draws, also returning each draw's value in index order.
std::vector<double> draw_level_values(const Problem& problem, int level, std::uint64_t first, std::uint64_t count,
                                      std::uint64_t seed, unsigned threads);

struct UniformNestedResult {
    double estimate = 0.0;
    double stderr_ = 0.0;
    double cost = 0.0;
};

/// theta_hat_{n,m} = mean of 1{g_hat_m(omega_i) > c} with binomial standard error.
UniformNestedResult run_uniform_nested(const market::Portfolio& p, const market::FactorMatrix& a,
                                       const coupling::CouplingConfig& config, std::uint64_t n, std::uint64_t m,
                                       std::uint64_t seed, unsigned threads = 1);

struct MlmcReport {
    double estimate = 0.0;
    double epsilon = 0.0;
    int levels = 0;  // L: levels 0..L were used
    std::vector<LevelStats> stats;
    RateEstimates rates;
    double total_cost = 0.0;
    double stderr_ = 0.0;  // sqrt(sum_l V_l / N_l)
    double wall_seconds = 0.0;
};

class NonConvergence : public std::runtime_error {
  public:
    NonConvergence(const std::string& what, MlmcReport partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const MlmcReport& partial() const { return partial_; }

  private:
    MlmcReport partial_;
};

/// Real-valued N_l = 2 eps^-2 sqrt(V_l / C_l) sum_j sqrt(V_j C_j): the
/// cheapest allocation with sum_l V_l / N_l = eps^2 / 2.
std::vector<double> optimal_allocation(std::span<const double> variance, std::span<const double> cost, double epsilon);

/// Adaptive MLMC: warm-up draws on levels 0..min_level, optimal top-ups, and a
/// bias test max_k |mean Y_{L-k}| 2^{-k alpha} / (2^alpha - 1) <= eps / sqrt(2)
/// over the last three coupled levels before stopping.
/// Throws NonConvergence past max_level.
MlmcReport run_mlmc(const market::Portfolio& p, const market::FactorMatrix& a, const coupling::CouplingConfig& config,
                    double epsilon, std::uint64_t seed, const DriverOptions& options = {});

struct ConvergenceStudy {
    std::vector<LevelStats> levels;
    /// Per level, `batches` disjoint sub-batches (for batch-means standard errors).
    std::vector<std::vector<LevelStats>> batches;
    RateEstimates rates;
};

ConvergenceStudy run_convergence_study(const market::Portfolio& p, const market::FactorMatrix& a,
                                       const coupling::CouplingConfig& config, int max_level,
                                       std::uint64_t n_per_level, std::uint64_t seed, unsigned threads = 1,
                                       int batches = 20);

struct EtaStudy {
    /// Per scenario: empty when every replicate variance is zero.
    std::vector<std::optional<Rate>> per_scenario;
    /// Common slope with per-scenario intercepts over the scenarios that fit.
    Rate pooled;
    /// variance[s][i]: variance of g_hat at m_grid[i] across replicates.
    std::vector<std::vector<double>> variance;
};

EtaStudy run_eta_study(const market::Portfolio& p, const market::FactorMatrix& a,
                       std::span<const market::Scenario> scenarios, std::span<const std::uint64_t> m_grid,
                       int replicates, std::uint64_t seed, coupling::InnerSampling inner);

struct SweepEntry {
    std::string name;
    coupling::CouplingConfig config;
    market::FactorMatrix factor;
};

struct SweepCell {
    double epsilon = 0.0;
    std::string coupling;
    double mean_cost = 0.0;
    double rmse = 0.0;
    int converged_runs = 0;
    std::vector<double> estimates;
    std::string error;  // non-empty if a run failed to converge

    double eps2_cost() const { return epsilon * epsilon * mean_cost; }
};

/// run_mlmc for every (entry, eps) with `repeats` seeds; RMSE is measured
/// against `reference`.
std::vector<SweepCell> run_complexity_sweep(const market::Portfolio& p, std::span<const SweepEntry> entries,
                                            std::span<const double> eps_list, int repeats, std::uint64_t seed,
                                            double reference, const DriverOptions& options = {});

/// Slope of log(cost) against log(1/eps) over the cells of one coupling.
double complexity_slope(std::span<const SweepCell> cells, const std::string& coupling);

}  // namespace mlqmc::driver
