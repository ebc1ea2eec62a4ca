#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "mlqmc/lds.h"
#include "mlqmc/philox.h"
#include "stat_tests.h"

using namespace mlqmc;
using namespace mlqmc::lds;

TEST_CASE("philox known-answer vectors") {
    CHECK(Philox4x32(Philox4x32::Key{0, 0})({0, 0, 0, 0}) ==
          Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32(Philox4x32::Key{0xffffffff, 0xffffffff})({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}) ==
          Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32(Philox4x32::Key{0xa4093822, 0x299f31d0})({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}) ==
          Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("open uniforms stay inside (0,1)") {
    CHECK(open_uniform32(0) > 0.0);
    CHECK(open_uniform32(0xffffffffu) < 1.0);
    CHECK(open_uniform52(0, 0) > 0.0);
    CHECK(open_uniform52(0xffffffffu, 0xffffffffu) < 1.0);
}

TEST_CASE("unscrambled van der Corput prefix") {
    const auto block = generate_block(DigitalSequenceSpec::sobol(1), 0, 4);
    REQUIRE(block.count == 4);
    CHECK(block.coords == std::vector<double>{0.0, 0.5, 0.25, 0.75});
}

TEST_CASE("unscrambled two-dimensional points from index 1") {
    const auto block = generate_block(DigitalSequenceSpec::sobol(2), 1, 3);
    CHECK(block.coords == std::vector<double>{0.5, 0.5, 0.25, 0.75, 0.75, 0.25});
}

TEST_CASE("bundled table matches the data file") {
    std::ifstream in(MLQMC_DATA_DIR "/new-joe-kuo-6.1024.txt");
    REQUIRE(in);
    const auto from_file = DigitalSequenceSpec::from_joe_kuo(in, 64);
    const auto& bundled = DigitalSequenceSpec::sobol(64);
    for (unsigned k = 0; k < 64; ++k) CHECK(from_file.column(k) == bundled.column(k));
    CHECK(DigitalSequenceSpec::bundled_max_dimension() == 1024);
    CHECK(DigitalSequenceSpec::sobol(3).quality_t() == 1);
}

TEST_CASE("direction table loader rejects malformed input") {
    auto load = [](const std::string& text, unsigned d) {
        std::istringstream in(text);
        return DigitalSequenceSpec::from_joe_kuo(in, d);
    };
    const std::string header = "d s a m_i\n";
    CHECK_NOTHROW(load(header + "2 1 0 1\n3 2 1 1 3\n", 3));
    CHECK_THROWS_AS(load(header + "2 1 0 1\n", 3), std::invalid_argument);         // too few coordinates
    CHECK_THROWS_AS(load(header + "3 1 0 1\n", 2), std::invalid_argument);         // out of order
    CHECK_THROWS_AS(load(header + "2 2 1 1\n", 2), std::invalid_argument);         // missing m_2
    CHECK_THROWS_AS(load(header + "2 1 0 1 1\n", 2), std::invalid_argument);       // extra value
    CHECK_THROWS_AS(load(header + "2 2 1 1 2\n", 2), std::invalid_argument);       // even m_2
    CHECK_THROWS_AS(load(header + "2 2 1 1 5\n", 2), std::invalid_argument);       // m_2 >= 4
}

TEST_CASE("direction numbers must have the leading bit on the diagonal") {
    DigitalSequenceSpec::Column col{};
    for (int j = 0; j < kDigits; ++j) col[j] = 1u << (kDigits - 1 - j);
    CHECK_NOTHROW(DigitalSequenceSpec({col}, 0));
    auto bad = col;
    bad[3] = 0;
    CHECK_THROWS_AS(DigitalSequenceSpec({bad}, 0), std::invalid_argument);
    bad = col;
    bad[3] |= 1u;  // bit below the diagonal
    CHECK_THROWS_AS(DigitalSequenceSpec({bad}, 0), std::invalid_argument);
    CHECK_THROWS_AS(DigitalSequenceSpec({}, 0), std::invalid_argument);
}

TEST_CASE("generate_block argument errors") {
    const auto& spec = DigitalSequenceSpec::sobol(2);
    CHECK_THROWS_AS(generate_block(spec, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(generate_block(spec, (std::uint64_t{1} << 32) - 1, 2), std::out_of_range);
    CHECK_NOTHROW(generate_block(spec, (std::uint64_t{1} << 32) - 1, 1));
}

TEST_CASE("coordinates lie in [0,1)") {
    const auto block = generate_block(DigitalSequenceSpec::sobol(8), 0, 1024, BlockScramble{3, 7});
    for (double x : block.coords) {
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("unscrambled prefixes are nets") {
    for (unsigned d : {1u, 2u, 3u, 5u}) {
        const auto& spec = DigitalSequenceSpec::sobol(d);
        for (unsigned k = spec.quality_t() + 1; k <= 10; ++k) {
            CAPTURE(d);
            CAPTURE(k);
            CHECK(verify_net_balance(generate_block(spec, 0, std::uint64_t{1} << k), k, spec.quality_t()));
        }
    }
}

TEST_CASE("scrambled prefixes are nets up to 2^12 points") {
    for (unsigned d : {1u, 2u, 3u}) {
        const auto& spec = DigitalSequenceSpec::sobol(d);
        for (std::uint64_t rep = 0; rep < 3; ++rep) {
            for (unsigned k = spec.quality_t() + 1; k <= 12; ++k) {
                CAPTURE(d);
                CAPTURE(k);
                const auto block = generate_block(spec, 0, std::uint64_t{1} << k, BlockScramble{99, rep});
                CHECK(verify_net_balance(block, k, spec.quality_t()));
            }
        }
    }
}

TEST_CASE("scrambled one-dimensional blocks hit every dyadic interval once") {
    for (unsigned k = 1; k <= 10; ++k) {
        const auto block = generate_block(DigitalSequenceSpec::sobol(1), 0, std::uint64_t{1} << k, BlockScramble{5, k});
        std::set<std::uint64_t> cells;
        for (double x : block.coords) cells.insert(static_cast<std::uint64_t>(std::ldexp(x, static_cast<int>(k))));
        CHECK(cells.size() == (std::size_t{1} << k));
    }
}

TEST_CASE("pseudo-random points are not a net") {
    PointBlock block{256, 2, {}};
    const Philox4x32 gen(std::uint64_t{12345});
    for (std::uint32_t i = 0; i < 256; ++i) {
        const auto w = gen({i, 0, 0, 0});
        block.coords.push_back(open_uniform32(w[0]));
        block.coords.push_back(open_uniform32(w[1]));
    }
    CHECK_FALSE(verify_net_balance(block, 8, 0));
}

TEST_CASE("verify_net_balance argument checks") {
    const auto block = generate_block(DigitalSequenceSpec::sobol(2), 0, 6);
    CHECK_THROWS_AS(verify_net_balance(block, 3, 0), std::invalid_argument);
    const auto ok = generate_block(DigitalSequenceSpec::sobol(2), 0, 8);
    CHECK_THROWS_AS(verify_net_balance(ok, 3, 3), std::invalid_argument);
}

TEST_CASE("owen scramble is a bijection that respects digit prefixes") {
    const std::uint64_t stream = scramble_stream({1, 2, 3});
    std::set<std::uint32_t> images;
    for (std::uint32_t x = 0; x < 4096; ++x) images.insert(owen_scramble(x << 20, stream) >> 20);
    CHECK(images.size() == 4096);
    // Inputs sharing their top j digits share their top j output digits.
    for (std::uint32_t x = 0; x < 1000; ++x) {
        const std::uint32_t a = x * 2654435761u;
        const std::uint32_t b = a ^ 0x0000ffffu;
        CHECK((owen_scramble(a, stream) >> 16) == (owen_scramble(b, stream) >> 16));
    }
}

TEST_CASE("scramble keys are reproducible and distinct") {
    CHECK(scramble_stream({1, 2, 3}) == scramble_stream({1, 2, 3}));
    std::set<std::uint64_t> streams;
    for (std::uint64_t seed : {0ull, 1ull})
        for (std::uint64_t rep : {0ull, 1ull, 2ull})
            for (std::uint32_t dim : {0u, 1u, 2u}) streams.insert(scramble_stream({seed, rep, dim}));
    CHECK(streams.size() == 18);
}

TEST_CASE("scrambled blocks are bit-identical across threads") {
    const auto& spec = DigitalSequenceSpec::sobol(4);
    const auto ref = generate_block(spec, 16, 512, BlockScramble{42, 9});
    std::vector<PointBlock> out(4);
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t) pool.emplace_back([&, t] { out[t] = generate_block(spec, 16, 512, BlockScramble{42, 9}); });
    for (auto& t : pool) t.join();
    for (const auto& b : out) CHECK(b.coords == ref.coords);
    std::vector<std::uint32_t> bits(512 * 4);
    generate_block_bits(spec, 16, 512, BlockScramble{42, 9}, bits);
    for (std::size_t i = 0; i < bits.size(); ++i) CHECK(bits[i] * 0x1p-32 == ref.coords[i]);
}

TEST_CASE("scrambled coordinates are marginally uniform across keys") {
    const auto& spec = DigitalSequenceSpec::sobol(3);
    for (std::size_t point : {0u, 1u, 5u, 13u}) {
        for (unsigned k = 0; k < 3; ++k) {
            std::vector<double> xs;
            for (std::uint64_t rep = 0; rep < 4096; ++rep) {
                xs.push_back(generate_block(spec, 0, 16, BlockScramble{777, rep})(point, k));
            }
            CAPTURE(point);
            CAPTURE(k);
            CHECK(stat_tests::uniform_ok(xs, 0.001));
        }
    }
}

TEST_CASE("the two halves of a scrambled block have the same law") {
    const auto& spec = DigitalSequenceSpec::sobol(2);
    auto statistic = [](const PointBlock& b, std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += std::exp(b(i, 0)) * std::cos(3.0 * b(i, 1));
        return s / static_cast<double>(hi - lo);
    };
    for (unsigned k : {2u, 4u}) {
        const std::size_t half = std::size_t{1} << k;
        std::vector<double> first, second;
        for (std::uint64_t rep = 0; rep < 2000; ++rep) {
            first.push_back(statistic(generate_block(spec, 0, 2 * half, BlockScramble{31, rep}), 0, half));
            second.push_back(statistic(generate_block(spec, 0, 2 * half, BlockScramble{31, rep + 2000}), half, 2 * half));
        }
        CAPTURE(k);
        CHECK(stat_tests::same_law(first, second, 0.001));
    }
}

TEST_CASE("inverse normal values") {
    CHECK(inverse_normal_cdf(0.5) == 0.0);
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::domain_error);
    CHECK_THROWS_AS(inverse_normal_cdf(1.0), std::domain_error);
    CHECK_THROWS_AS(inverse_normal_cdf(-0.1), std::domain_error);
    CHECK_THROWS_AS(inverse_normal_cdf(std::nan("")), std::domain_error);
}

TEST_CASE("inverse normal accuracy against a long-double CDF") {
    auto cdf = [](double z) { return 0.5L * std::erfc(-static_cast<long double>(z) / std::sqrt(2.0L)); };
    double prev = -INFINITY;
    for (int e = -30; e <= -1; ++e) {
        for (double mant : {1.0, 2.5, 5.0, 7.5}) {
            const double u = mant * std::pow(10.0, e);
            if (u >= 0.5) continue;
            for (double p : {u, 1.0 - u}) {
                if (p == 1.0) continue;
                const double z = inverse_normal_cdf(p);
                CAPTURE(p);
                CHECK(std::abs(static_cast<double>(cdf(z) - p)) <= 1e-9 * std::min(p, 1.0 - p) + 1e-16);
            }
        }
    }
    for (int i = 1; i < 20000; ++i) {
        const double u = i / 20000.0;
        const double z = inverse_normal_cdf(u);
        CHECK(z > prev);
        prev = z;
        CHECK(std::abs(static_cast<double>(cdf(z)) - u) <= 1e-9);
        CHECK(std::abs(z + inverse_normal_cdf(1.0 - u)) <= 1e-12);
    }
}
