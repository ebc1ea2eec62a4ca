#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "mlqmc/driver.h"
#include "mlqmc/philox.h"

namespace mlqmc::driver {

namespace {

constexpr std::uint64_t kInnerPurpose = 0x696e6e6572ull;

// Runs fn(sampler, chunk) for every chunk on up to `threads` workers, each
// with a private LevelSampler. Chunks are claimed dynamically; results must be
// written to per-chunk slots by the caller.
template <class Fn>
void for_each_chunk(const Problem& problem, std::uint64_t n_chunks, unsigned threads, Fn fn) {
    const auto workers = static_cast<unsigned>(std::clamp<std::uint64_t>(threads, 1, std::max<std::uint64_t>(n_chunks, 1)));
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        try {
            coupling::LevelSampler sampler(problem.config, problem.portfolio, problem.factor);
            for (std::uint64_t c = next++; c < n_chunks; c = next++) fn(sampler, c);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n_chunks;
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

coupling::LevelDraw one_draw(coupling::LevelSampler& sampler, const Problem& problem, int level, std::uint64_t index,
                   std::uint64_t seed) {
    const auto omega = market::draw_scenario(problem.portfolio, seed, static_cast<std::uint64_t>(level), index);
    const coupling::InnerStream stream{derive_seed(seed, kInnerPurpose),
                                       (static_cast<std::uint64_t>(level) << 40) | index};
    return sampler.sample(level, omega, stream);
}

}  // namespace

LevelStats draw_level(const Problem& problem, int level, std::uint64_t first, std::uint64_t count,
                      std::uint64_t seed, unsigned threads) {
    const std::uint64_t n_chunks = (count + kChunkDraws - 1) / kChunkDraws;
    std::vector<LevelStats> partial(n_chunks);
    for_each_chunk(problem, n_chunks, threads, [&](coupling::LevelSampler& sampler, std::uint64_t c) {
        LevelStats s;
        const std::uint64_t lo = c * kChunkDraws;
        const std::uint64_t hi = std::min(count, lo + kChunkDraws);
        for (std::uint64_t i = lo; i < hi; ++i) {
            const auto d = one_draw(sampler, problem, level, first + i, seed);
            s.add(d.y, static_cast<double>(d.cost));
        }
        partial[c] = s;
    });
    LevelStats total;
    total.level = level;
    for (const auto& s : partial) total += s;
    return total;
}

std::vector<double> draw_level_values(const Problem& problem, int level, std::uint64_t first, std::uint64_t count,
                                      std::uint64_t seed, unsigned threads) {
    std::vector<double> values(count);
    const std::uint64_t n_chunks = (count + kChunkDraws - 1) / kChunkDraws;
    for_each_chunk(problem, n_chunks, threads, [&](coupling::LevelSampler& sampler, std::uint64_t c) {
        const std::uint64_t lo = c * kChunkDraws;
        const std::uint64_t hi = std::min(count, lo + kChunkDraws);
        for (std::uint64_t i = lo; i < hi; ++i) values[i] = one_draw(sampler, problem, level, first + i, seed).y;
    });
    return values;
}

UniformNestedResult run_uniform_nested(const market::Portfolio& p, const market::FactorMatrix& a,
                                       const coupling::CouplingConfig& config, std::uint64_t n, std::uint64_t m,
                                       std::uint64_t seed, unsigned threads) {
    if (n == 0 || m == 0) throw std::invalid_argument("run_uniform_nested: n and m must be >= 1");
    coupling::CouplingConfig indicator = config;
    indicator.kind = coupling::CouplingKind::crude;
    indicator.smoothing.reset();
    indicator.schedule.m0 = m;
    indicator.validate();
    const Problem problem{p, a, indicator};
    const auto stats = draw_level(problem, 0, 0, n, seed, threads);
    UniformNestedResult r;
    r.estimate = stats.mean();
    r.stderr_ = std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(n));
    r.cost = stats.cost;
    return r;
}

}  // namespace mlqmc::driver
