#include <bit>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mlqmc/lds.h"

namespace mlqmc::lds {

bool verify_net_balance(const PointBlock& block, unsigned k, unsigned t) {
    if (block.count == 0 || !std::has_single_bit(block.count)) {
        throw std::invalid_argument("verify_net_balance: block size is not a power of two");
    }
    if (std::bit_width(block.count) - 1 != k) {
        throw std::invalid_argument("verify_net_balance: block does not hold 2^k points");
    }
    if (k <= t) throw std::invalid_argument("verify_net_balance: requires k > t");

    const unsigned d = block.dimension;
    const unsigned resolution = k - t;
    const std::size_t expected = std::size_t{1} << t;
    std::vector<unsigned> split(d, 0);
    std::vector<std::size_t> counts(std::size_t{1} << resolution);

    auto check = [&]() {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < block.count; ++i) {
            std::size_t cell = 0;
            for (unsigned c = 0; c < d; ++c) {
                if (split[c] == 0) continue;
                const double x = block(i, c);
                const auto digits = static_cast<std::size_t>(std::floor(std::ldexp(x, static_cast<int>(split[c]))));
                cell = (cell << split[c]) | digits;
            }
            ++counts[cell];
        }
        for (auto n : counts) {
            if (n != expected) return false;
        }
        return true;
    };

    // Enumerate every way of splitting `resolution` digits among d axes.
    std::function<bool(unsigned, unsigned)> visit = [&](unsigned axis, unsigned left) -> bool {
        if (axis + 1 == d) {
            split[axis] = left;
            return check();
        }
        for (unsigned q = 0; q <= left; ++q) {
            split[axis] = q;
            if (!visit(axis + 1, left - q)) return false;
        }
        return true;
    };
    return visit(0, resolution);
}

}  // namespace mlqmc::lds
