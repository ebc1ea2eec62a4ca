#pragma once

// Level-difference samplers for nested MLMC. Each draw takes one outer
// scenario and one block of m_l inner points, and returns
//   level 0:  F_0(g_hat over m_0 points)
//   level l:  F_l(g_hat over all m_l points) - coarse term
// where the coarse term reuses the first m_{l-1} points (crude) or averages
// both halves (antithetic), and F_l is the indicator 1{x > c} or the sigmoid
// S(x - c; k0 r^l).

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mlqmc/lds.h"
#include "mlqmc/market.h"

namespace mlqmc::coupling {

enum class CouplingKind { crude, antithetic, smoothed, smoothed_antithetic };
enum class InnerSampling { mc, rqmc };

const char* to_string(CouplingKind k);
const char* to_string(InnerSampling s);

inline bool is_smoothed(CouplingKind k) {
    return k == CouplingKind::smoothed || k == CouplingKind::smoothed_antithetic;
}
inline bool is_antithetic(CouplingKind k) {
    return k == CouplingKind::antithetic || k == CouplingKind::smoothed_antithetic;
}

/// m_l = m0 * 2^l.
struct LevelSchedule {
    std::uint64_t m0 = 32;
    std::uint64_t inner_samples(int level) const { return m0 << level; }
};

/// Steepness k0 * r^l of the level-l sigmoid.
struct SmoothingSchedule {
    double k0 = 8.0;
    double r = 2.0;
    double steepness(int level) const;
};

class ConfigurationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct CouplingConfig {
    CouplingKind kind = CouplingKind::crude;
    InnerSampling inner = InnerSampling::rqmc;
    market::FactorProvenance factor = market::FactorProvenance::cholesky;
    double threshold = 0.0;
    LevelSchedule schedule;
    std::optional<SmoothingSchedule> smoothing;

    /// Throws ConfigurationError.
    void validate() const;
};

struct LevelDraw {
    double y = 0.0;
    std::uint64_t cost = 0;
};

/// Randomness of one draw's inner points: Owen scrambling keyed by
/// (seed, replicate, coordinate) in RQMC mode, counter-based uniforms keyed by
/// (seed, replicate) in MC mode.
struct InnerStream {
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
};

/// Steepness beyond which the sigmoid is replaced by the indicator.
inline constexpr double kMaxSteepness = 1e9;

/// 1 / (1 + exp(-k x)), evaluated without overflow.
double sigmoid(double x, double k);

/// Arithmetic mean of psi over the block.
double inner_mean(const market::Portfolio& p, const market::FactorMatrix& a, const market::Scenario& omega,
                  const lds::PointBlock& points);

/// Inner estimates that make up one level-l draw.
struct InnerEstimates {
    double fine = 0.0;           // mean over all m_l points
    double coarse_first = 0.0;   // mean over points 0 .. m_{l-1}-1 (l >= 1)
    double coarse_second = 0.0;  // mean over points m_{l-1} .. m_l-1 (l >= 1)
};

/// Reusable sampler: caches the payoff constants and scratch buffers. One
/// instance per worker thread.
class LevelSampler {
  public:
    LevelSampler(CouplingConfig config, const market::Portfolio& p, const market::FactorMatrix& a,
                 const lds::DigitalSequenceSpec* sequence = nullptr);

    const CouplingConfig& config() const { return config_; }

    /// Fills `uniforms` (m x d, row major) with the inner points of a draw.
    void inner_points(std::uint64_t m, InnerStream stream, std::span<double> uniforms);

    /// psi at the first m inner points of `stream` (prefixes are nested).
    void psi_values(std::uint64_t m, const market::Scenario& omega, InnerStream stream, std::span<double> out);

    InnerEstimates estimates(int level, const market::Scenario& omega, InnerStream stream);

    /// F_l(x): indicator or level-l sigmoid of x - c.
    double functional(int level, double g_hat) const;

    LevelDraw sample(int level, const market::Scenario& omega, InnerStream stream);

  private:
    CouplingConfig config_;
    market::PayoffEvaluator payoff_;
    const lds::DigitalSequenceSpec* sequence_;
    int d_;
    std::vector<std::uint32_t> bits_;
    std::vector<double> normals_;
    std::vector<double> psi_;
};

LevelDraw sample_level(const CouplingConfig& config, int level, const market::Portfolio& p,
                       const market::FactorMatrix& a, const market::Scenario& omega, InnerStream stream);

}  // namespace mlqmc::coupling
