#include <doctest.h>

#include <cmath>

#include "mlqmc/coupling.h"
#include "mlqmc/philox.h"
#include "stat_tests.h"

using namespace mlqmc;
using namespace mlqmc::coupling;

namespace {

struct PutSetup {
    market::Portfolio p = market::single_put_portfolio();
    market::FactorMatrix a{p.vol_factor, market::FactorProvenance::cholesky};
    double c = market::calibrate_threshold(p, 0.3);

    CouplingConfig config(CouplingKind kind, InnerSampling inner = InnerSampling::rqmc) const {
        CouplingConfig cfg;
        cfg.kind = kind;
        cfg.inner = inner;
        cfg.threshold = c;
        if (is_smoothed(kind)) cfg.smoothing = SmoothingSchedule{8.0, 2.0};
        return cfg;
    }
};

}  // namespace

TEST_CASE("sigmoid identities") {
    for (double k : {1e-3, 1.0, 8.0, 1e4}) {
        CHECK(sigmoid(0.0, k) == 0.5);
        for (double x : {1e-6, 0.01, 0.3, 1.0, 5.0, 100.0}) {
            CHECK(std::abs(sigmoid(x, k) + sigmoid(-x, k) - 1.0) <= 1e-15);
        }
    }
    CHECK(sigmoid(1.0, 8.0) == doctest::Approx(0.9996646498695335).epsilon(1e-14));
    CHECK(sigmoid(1.0, 1e4) == 1.0);
    CHECK(sigmoid(-1.0, 1e4) >= 0.0);
    CHECK(std::isfinite(sigmoid(-1e4, 1e4)));
}

TEST_CASE("level schedules") {
    LevelSchedule s;
    CHECK(s.inner_samples(0) == 32);
    CHECK(s.inner_samples(5) == 1024);
    SmoothingSchedule k{8.0, 2.0};
    CHECK(k.steepness(3) == 64.0);
}

TEST_CASE("configuration errors") {
    PutSetup put;
    auto cfg = put.config(CouplingKind::smoothed);
    cfg.smoothing.reset();
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
    CHECK_THROWS_AS(LevelSampler(cfg, put.p, put.a), ConfigurationError);
    cfg = put.config(CouplingKind::smoothed);
    cfg.smoothing->r = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
    cfg.smoothing->r = 2.0;
    cfg.smoothing->k0 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
    cfg = put.config(CouplingKind::crude);
    cfg.schedule.m0 = 24;
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
    cfg.inner = InnerSampling::mc;
    CHECK_NOTHROW(cfg.validate());
    cfg.schedule.m0 = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
}

TEST_CASE("inner mean over explicit blocks") {
    PutSetup put;
    const market::Scenario omega{{99.0}};
    lds::PointBlock one{1, 1, {0.5}};
    const double u[] = {0.5};
    CHECK(inner_mean(put.p, put.a, omega, one) == doctest::Approx(market::inner_payoff(put.p, put.a, omega, u)));

    const auto block = lds::generate_block(lds::DigitalSequenceSpec::sobol(1), 0, 64, lds::BlockScramble{1, 2});
    auto twice = block;
    twice.count *= 2;
    twice.coords.insert(twice.coords.end(), block.coords.begin(), block.coords.end());
    CHECK(inner_mean(put.p, put.a, omega, twice) == doctest::Approx(inner_mean(put.p, put.a, omega, block)).epsilon(1e-14));
    CHECK_THROWS_AS(inner_mean(put.p, put.a, omega, lds::PointBlock{}), std::invalid_argument);
}

TEST_CASE("RQMC inner mean is consistent with the exact loss") {
    PutSetup put;
    const market::Scenario omega{{101.0}};
    std::vector<double> means;
    for (std::uint64_t r = 0; r < 32; ++r) {
        const auto block = lds::generate_block(lds::DigitalSequenceSpec::sobol(1), 0, 1 << 16, lds::BlockScramble{4, r});
        means.push_back(inner_mean(put.p, put.a, omega, block));
    }
    const auto m = stat_tests::moments(means);
    CHECK(std::abs(m.mean - market::exact_loss(put.p, omega)) < 3.0 * m.se());
}

TEST_CASE("level draws: trivial cases") {
    PutSetup put;
    const market::Scenario deep{{160.0}};  // put worthless: loss = V0 > c on every sub-block
    for (auto kind : {CouplingKind::crude, CouplingKind::antithetic}) {
        for (int level : {0, 1, 4}) {
            const auto d = sample_level(put.config(kind), level, put.p, put.a, deep, {1, 2});
            CHECK(d.y == (level == 0 ? 1.0 : 0.0));
            CHECK(d.cost == 32u << level);
        }
    }
    // Smoothed level 0 at g_hat = c gives exactly one half.
    auto cfg = put.config(CouplingKind::smoothed);
    LevelSampler sampler(cfg, put.p, put.a);
    const market::Scenario omega{{100.0}};
    cfg.threshold = sampler.estimates(0, omega, {3, 4}).fine;
    CHECK(sample_level(cfg, 0, put.p, put.a, omega, {3, 4}).y == 0.5);
    CHECK_THROWS_AS(sample_level(cfg, -1, put.p, put.a, omega, {3, 4}), std::invalid_argument);
}

TEST_CASE("level draw values are quantized or bounded") {
    PutSetup put;
    for (auto kind : {CouplingKind::crude, CouplingKind::antithetic, CouplingKind::smoothed,
                      CouplingKind::smoothed_antithetic}) {
        for (auto inner : {InnerSampling::mc, InnerSampling::rqmc}) {
            LevelSampler sampler(put.config(kind, inner), put.p, put.a);
            for (std::uint64_t i = 0; i < 2000; ++i) {
                const int level = static_cast<int>(i % 4);
                const auto omega = market::draw_scenario(put.p, 9, 0, i);
                const double y = sampler.sample(level, omega, {9, i}).y;
                if (is_smoothed(kind)) {
                    CHECK(std::abs(y) < 1.0);
                } else {
                    const double twice = 2.0 * y;
                    CHECK(twice == std::round(twice));
                    CHECK(std::abs(y) <= 1.0);
                    if (!is_antithetic(kind)) CHECK(y == std::round(y));
                }
            }
        }
    }
}

TEST_CASE("inner points: MC and RQMC streams") {
    PutSetup put;
    LevelSampler rqmc(put.config(CouplingKind::crude), put.p, put.a);
    std::vector<double> u(64), v(64);
    rqmc.inner_points(64, {5, 6}, u);
    const auto block = lds::generate_block(lds::DigitalSequenceSpec::sobol(1), 0, 64, lds::BlockScramble{5, 6});
    CHECK(u == block.coords);

    LevelSampler mc(put.config(CouplingKind::crude, InnerSampling::mc), put.p, put.a);
    mc.inner_points(64, {5, 6}, u);
    mc.inner_points(64, {5, 6}, v);
    CHECK(u == v);
    mc.inner_points(64, {5, 7}, v);
    CHECK(u != v);
    std::vector<double> many(1 << 14);
    mc.inner_points(many.size(), {1, 1}, many);
    CHECK(stat_tests::uniform_ok(many, 0.001));
    // prefixes are nested
    std::vector<double> prefix(32);
    mc.inner_points(32, {1, 1}, prefix);
    CHECK(std::equal(prefix.begin(), prefix.end(), many.begin()));
}

TEST_CASE("telescoping: coarse functional at level l has the law of the fine functional at l-1") {
    PutSetup put;
    for (auto inner : {InnerSampling::rqmc, InnerSampling::mc}) {
        LevelSampler sampler(put.config(CouplingKind::crude, inner), put.p, put.a);
        for (int level = 1; level <= 4; ++level) {
            const std::uint64_t n = 100000;
            double coarse = 0.0, fine = 0.0;
            for (std::uint64_t i = 0; i < n; ++i) {
                const auto est = sampler.estimates(level, market::draw_scenario(put.p, 21, level, i), {21, i});
                coarse += sampler.functional(level - 1, est.coarse_first);
                const auto prev = sampler.estimates(level - 1, market::draw_scenario(put.p, 22, level, i), {22, i});
                fine += sampler.functional(level - 1, prev.fine);
            }
            const double pc = coarse / n, pf = fine / n;
            const double se = std::sqrt(pc * (1 - pc) / n + pf * (1 - pf) / n);
            CAPTURE(level);
            CHECK(std::abs(pc - pf) < 3.0 * se);
        }
    }
}

TEST_CASE("antithetic halves are equal in law") {
    PutSetup put;
    LevelSampler sampler(put.config(CouplingKind::antithetic), put.p, put.a);
    for (int level : {1, 3}) {
        std::vector<double> first, second;
        for (std::uint64_t i = 0; i < 20000; ++i) {
            first.push_back(sampler.estimates(level, market::draw_scenario(put.p, 31, 0, i), {31, i}).coarse_first);
            second.push_back(
                sampler.estimates(level, market::draw_scenario(put.p, 32, 0, i), {32, i}).coarse_second);
        }
        CAPTURE(level);
        CHECK(stat_tests::same_law(first, second, 0.001));
    }
}

TEST_CASE("antithetic and smoothed draws are reproducible") {
    PutSetup put;
    const auto omega = market::draw_scenario(put.p, 1, 0, 3);
    for (auto kind : {CouplingKind::antithetic, CouplingKind::smoothed_antithetic}) {
        const auto a = sample_level(put.config(kind), 3, put.p, put.a, omega, {8, 8});
        const auto b = sample_level(put.config(kind), 3, put.p, put.a, omega, {8, 8});
        CHECK(a.y == b.y);
    }
}

TEST_CASE("steepness cap substitutes the indicator") {
    PutSetup put;
    auto cfg = put.config(CouplingKind::smoothed);
    cfg.smoothing = SmoothingSchedule{1e8, 10.0};
    LevelSampler sampler(cfg, put.p, put.a);
    CHECK(sampler.functional(2, put.c + 1e-12) == 1.0);
    CHECK(sampler.functional(2, put.c - 1e-12) == 0.0);
    CHECK(sampler.functional(0, put.c) == 0.5);
}
