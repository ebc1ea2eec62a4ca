#include "mlqmc/coupling.h"

#include <algorithm>
#include <cmath>

#include "mlqmc/philox.h"

namespace mlqmc::coupling {

namespace {

constexpr std::uint64_t kMcPurpose = 0x6d63696e6e6572ull;

double to_normal(double u) {
    return lds::inverse_normal_cdf_unchecked(std::clamp(u, market::kMinUniform, market::kMaxUniform));
}

}  // namespace

const char* to_string(CouplingKind k) {
    switch (k) {
        case CouplingKind::crude: return "crude";
        case CouplingKind::antithetic: return "antithetic";
        case CouplingKind::smoothed: return "smoothed";
        case CouplingKind::smoothed_antithetic: return "smoothed_antithetic";
    }
    return "?";
}

const char* to_string(InnerSampling s) { return s == InnerSampling::mc ? "mc" : "rqmc"; }

double SmoothingSchedule::steepness(int level) const { return k0 * std::pow(r, level); }

void CouplingConfig::validate() const {
    if (schedule.m0 == 0) throw ConfigurationError("coupling: m0 must be >= 1");
    if (inner == InnerSampling::rqmc && (schedule.m0 & (schedule.m0 - 1)) != 0) {
        throw ConfigurationError("coupling: m0 must be a power of two for RQMC inner sampling");
    }
    if (is_smoothed(kind)) {
        if (!smoothing) throw ConfigurationError("coupling: smoothed kinds need a smoothing schedule");
        if (!(smoothing->k0 > 0.0)) throw ConfigurationError("coupling: k0 must be positive");
        if (!(smoothing->r > 1.0)) throw ConfigurationError("coupling: r must exceed 1");
    }
}

double sigmoid(double x, double k) {
    const double t = k * x;
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double inner_mean(const market::Portfolio& p, const market::FactorMatrix& a, const market::Scenario& omega,
                  const lds::PointBlock& points) {
    if (points.count == 0) throw std::invalid_argument("inner_mean: empty point block");
    market::PayoffEvaluator payoff(p, a);
    payoff.set_scenario(omega);
    std::vector<double> normals(points.coords.size());
    std::transform(points.coords.begin(), points.coords.end(), normals.begin(), to_normal);
    std::vector<double> psi(points.count);
    payoff.evaluate(normals, psi);
    double sum = 0.0;
    for (double x : psi) sum += x;
    return sum / static_cast<double>(points.count);
}

LevelSampler::LevelSampler(CouplingConfig config, const market::Portfolio& p, const market::FactorMatrix& a,
                           const lds::DigitalSequenceSpec* sequence)
    : config_(std::move(config)), payoff_(p, a), sequence_(sequence), d_(p.dim()) {
    config_.validate();
    if (config_.inner == InnerSampling::rqmc && sequence_ == nullptr) {
        sequence_ = &lds::DigitalSequenceSpec::sobol(static_cast<unsigned>(d_));
    }
    if (sequence_ != nullptr && static_cast<int>(sequence_->dimension()) != d_) {
        throw ConfigurationError("coupling: sequence dimension differs from the portfolio");
    }
}

void LevelSampler::inner_points(std::uint64_t m, InnerStream stream, std::span<double> uniforms) {
    const std::uint64_t n = m * static_cast<std::uint64_t>(d_);
    if (config_.inner == InnerSampling::rqmc) {
        bits_.resize(n);
        lds::generate_block_bits(*sequence_, 0, m, lds::BlockScramble{stream.seed, stream.replicate}, bits_);
        for (std::uint64_t i = 0; i < n; ++i) uniforms[i] = bits_[i] * 0x1p-32;
        return;
    }
    const Philox4x32 gen(derive_seed(stream.seed, kMcPurpose));
    const auto rep_lo = static_cast<std::uint32_t>(stream.replicate);
    const auto rep_hi = static_cast<std::uint32_t>(stream.replicate >> 32);
    for (std::uint64_t f = 0; f < n; f += 4) {
        const std::uint64_t c = f / 4;
        const auto w = gen({rep_lo, rep_hi, static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)});
        for (std::uint64_t q = 0; q < 4 && f + q < n; ++q) uniforms[f + q] = open_uniform32(w[q]);
    }
}

void LevelSampler::psi_values(std::uint64_t m, const market::Scenario& omega, InnerStream stream,
                              std::span<double> out) {
    normals_.resize(m * static_cast<std::uint64_t>(d_));
    inner_points(m, stream, normals_);
    for (auto& x : normals_) x = to_normal(x);
    payoff_.set_scenario(omega);
    payoff_.evaluate(normals_, out.first(m));
}

InnerEstimates LevelSampler::estimates(int level, const market::Scenario& omega, InnerStream stream) {
    const std::uint64_t m = config_.schedule.inner_samples(level);
    psi_.resize(m);
    psi_values(m, omega, stream, psi_);

    InnerEstimates est;
    if (level == 0) {
        double sum = 0.0;
        for (double x : psi_) sum += x;
        est.fine = sum / static_cast<double>(m);
        return est;
    }
    const std::uint64_t half = m / 2;
    double first = 0.0, second = 0.0;
    for (std::uint64_t j = 0; j < half; ++j) first += psi_[j];
    for (std::uint64_t j = half; j < m; ++j) second += psi_[j];
    est.fine = (first + second) / static_cast<double>(m);
    est.coarse_first = first / static_cast<double>(half);
    est.coarse_second = second / static_cast<double>(half);
    return est;
}

double LevelSampler::functional(int level, double g_hat) const {
    const double x = g_hat - config_.threshold;
    if (is_smoothed(config_.kind)) {
        const double k = config_.smoothing->steepness(level);
        if (k < kMaxSteepness) return sigmoid(x, k);
    }
    return x > 0.0 ? 1.0 : 0.0;
}

LevelDraw LevelSampler::sample(int level, const market::Scenario& omega, InnerStream stream) {
    if (level < 0) throw std::invalid_argument("sample_level: level must be >= 0");
    const auto est = estimates(level, omega, stream);
    LevelDraw draw;
    draw.cost = config_.schedule.inner_samples(level);
    const double fine = functional(level, est.fine);
    if (level == 0) {
        draw.y = fine;
    } else if (is_antithetic(config_.kind)) {
        draw.y = fine - 0.5 * (functional(level - 1, est.coarse_first) + functional(level - 1, est.coarse_second));
    } else {
        draw.y = fine - functional(level - 1, est.coarse_first);
    }
    return draw;
}

LevelDraw sample_level(const CouplingConfig& config, int level, const market::Portfolio& p,
                       const market::FactorMatrix& a, const market::Scenario& omega, InnerStream stream) {
    LevelSampler sampler(config, p, a);
    return sampler.sample(level, omega, stream);
}

}  // namespace mlqmc::coupling
