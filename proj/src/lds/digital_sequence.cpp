#include "mlqmc/lds.h"

#include <algorithm>
#include <array>
#ifdef __BMI2__
#include <immintrin.h>
#endif

#include <bit>
#include <istream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "mlqmc/philox.h"

namespace mlqmc::lds {

namespace detail {
extern const std::string_view kBundledDirectionTable;
}

namespace {

void validate_column(const DigitalSequenceSpec::Column& col, std::size_t k) {
    for (int j = 0; j < kDigits; ++j) {
        const std::uint32_t v = col[j];
        const int diag = kDigits - 1 - j;
        const bool diag_set = (v >> diag) & 1u;
        const bool below = diag > 0 && (v & ((1u << diag) - 1u)) != 0;
        if (!diag_set || below) {
            throw std::invalid_argument("direction number " + std::to_string(j + 1) + " of coordinate " +
                                        std::to_string(k + 1) + " does not have its leading bit in the top " +
                                        std::to_string(j + 1) + " positions");
        }
    }
}

DigitalSequenceSpec::Column van_der_corput_column() {
    DigitalSequenceSpec::Column col{};
    for (int j = 0; j < kDigits; ++j) col[j] = 1u << (kDigits - 1 - j);
    return col;
}

// Joe & Kuo recursion: v_i = v_{i-s} ^ (v_{i-s} >> s) ^ sum_k a_k v_{i-k}.
DigitalSequenceSpec::Column sobol_column(unsigned s, std::uint64_t a, const std::vector<std::uint64_t>& m) {
    DigitalSequenceSpec::Column v{};
    const unsigned init = std::min<unsigned>(s, kDigits);
    for (unsigned i = 0; i < init; ++i) {
        v[i] = static_cast<std::uint32_t>(m[i] << (kDigits - 1 - i));
    }
    for (unsigned i = s; i < static_cast<unsigned>(kDigits); ++i) {
        std::uint32_t value = v[i - s] ^ (v[i - s] >> s);
        for (unsigned k = 1; k < s; ++k) {
            if ((a >> (s - 1 - k)) & 1u) value ^= v[i - k];
        }
        v[i] = value;
    }
    return v;
}

}  // namespace

DigitalSequenceSpec::DigitalSequenceSpec(std::vector<Column> direction, unsigned quality_t)
    : direction_(std::move(direction)), t_(quality_t) {
    if (direction_.empty()) throw std::invalid_argument("digital sequence needs dimension >= 1");
    for (std::size_t k = 0; k < direction_.size(); ++k) validate_column(direction_[k], k);
}

DigitalSequenceSpec DigitalSequenceSpec::from_joe_kuo(std::istream& in, unsigned dimension) {
    if (dimension == 0) throw std::invalid_argument("digital sequence needs dimension >= 1");
    std::vector<Column> cols;
    cols.reserve(dimension);
    cols.push_back(van_der_corput_column());
    // t of the Sobol' construction: sum over coordinates of (degree - 1), with
    // coordinate 1 using the degree-1 polynomial x.
    unsigned t = 0;

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("direction table is empty");
    unsigned expected = 2;
    while (cols.size() < dimension && std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        unsigned d = 0, s = 0;
        std::uint64_t a = 0;
        if (!(ls >> d >> s >> a)) throw std::invalid_argument("malformed direction table line: " + line);
        if (d != expected) {
            throw std::invalid_argument("direction table out of order: expected coordinate " +
                                        std::to_string(expected) + ", got " + std::to_string(d));
        }
        if (s == 0 || s > static_cast<unsigned>(kDigits)) {
            throw std::invalid_argument("bad polynomial degree on coordinate " + std::to_string(d));
        }
        std::vector<std::uint64_t> m(s);
        for (unsigned i = 0; i < s; ++i) {
            if (!(ls >> m[i])) {
                throw std::invalid_argument("coordinate " + std::to_string(d) + " lists fewer than " +
                                            std::to_string(s) + " initial values");
            }
            if (m[i] % 2 == 0 || m[i] >= (std::uint64_t{1} << (i + 1))) {
                throw std::invalid_argument("initial value m_" + std::to_string(i + 1) + " of coordinate " +
                                            std::to_string(d) + " must be odd and below 2^" +
                                            std::to_string(i + 1));
            }
        }
        std::uint64_t extra = 0;
        if (ls >> extra) {
            throw std::invalid_argument("coordinate " + std::to_string(d) + " lists more than " +
                                        std::to_string(s) + " initial values");
        }
        cols.push_back(sobol_column(s, a, m));
        t += s - 1;
        ++expected;
    }
    if (cols.size() < dimension) {
        throw std::invalid_argument("direction table supports only " + std::to_string(cols.size()) +
                                    " coordinates, " + std::to_string(dimension) + " requested");
    }
    return DigitalSequenceSpec(std::move(cols), t);
}

const DigitalSequenceSpec& DigitalSequenceSpec::sobol(unsigned dimension) {
    static std::mutex mutex;
    static std::map<unsigned, DigitalSequenceSpec> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(dimension);
    if (it == cache.end()) {
        std::istringstream in{std::string(detail::kBundledDirectionTable)};
        it = cache.emplace(dimension, from_joe_kuo(in, dimension)).first;
    }
    return it->second;
}

unsigned DigitalSequenceSpec::bundled_max_dimension() {
    unsigned lines = 0;
    for (char c : detail::kBundledDirectionTable) lines += c == '\n';
    // header line replaced by the implicit first coordinate
    return lines;
}

std::uint64_t scramble_stream(const ScrambleKey& key) {
    const Philox4x32 gen(derive_seed(key.seed, 0x6f77656eull));
    const auto out = gen({static_cast<std::uint32_t>(key.replicate), static_cast<std::uint32_t>(key.replicate >> 32),
                          key.dimension, 0x5c7a3b1du});
    return (std::uint64_t{out[0]} << 32) | out[1];
}

namespace {

// Digits are processed in groups of 6, the last one padded with 4 zero digits.
// The flip of digit i of a group (i = 0 most significant) whose leading
// digits are d is bit (1 << i) | (d >> (6 - i)) of the group hash: one bit
// per node of the depth-6 subtree.
constexpr int kGroup = 6;
constexpr int kGroups = (kDigits + kGroup - 1) / kGroup;
constexpr int kPad = kGroups * kGroup - kDigits;

constexpr std::array<std::uint64_t, 64> kNodeMasks = [] {
    std::array<std::uint64_t, 64> m{};
    for (unsigned d = 0; d < 64; ++d) {
        for (unsigned i = 0; i < kGroup; ++i) m[d] |= std::uint64_t{1} << ((1u << i) | (d >> (kGroup - i)));
    }
    return m;
}();

constexpr std::array<std::uint8_t, 64> kReverse6 = [] {
    std::array<std::uint8_t, 64> r{};
    for (unsigned v = 0; v < 64; ++v) {
        for (unsigned i = 0; i < kGroup; ++i) r[v] |= ((v >> i) & 1u) << (kGroup - 1 - i);
    }
    return r;
}();

// Bits of h at the set positions of mask, packed in increasing order.
inline std::uint64_t gather_bits(std::uint64_t h, std::uint64_t mask) {
#ifdef __BMI2__
    return _pext_u64(h, mask);
#else
    std::uint64_t out = 0;
    for (int k = 0; mask != 0; mask &= mask - 1, ++k) out |= ((h >> std::countr_zero(mask)) & 1u) << k;
    return out;
#endif
}

}  // namespace

std::uint32_t owen_scramble(std::uint32_t x, std::uint64_t stream) {
    // Node (j, prefix) of the binary digit tree is encoded as (1 << j) | prefix;
    // one hash per node at depths 0, 6, 12, ... covers the subtree below it.
    const std::uint64_t wide = x;
    const std::uint64_t padded = wide << kPad;
    std::uint64_t flips = 0;
    for (int g = 0; g < kGroups; ++g) {
        const int base = g * kGroup;
        const std::uint64_t node = (std::uint64_t{1} << base) | (wide >> (kDigits - base));
        const std::uint64_t h = mix64(stream + node * 0x9E3779B97F4A7C15ull);
        const int shift = kGroups * kGroup - base - kGroup;
        const auto d = static_cast<unsigned>((padded >> shift) & 63u);
        flips |= std::uint64_t{kReverse6[gather_bits(h, kNodeMasks[d])]} << shift;
    }
    return x ^ static_cast<std::uint32_t>(flips >> kPad);
}

void generate_block_bits(const DigitalSequenceSpec& spec, std::uint64_t start, std::uint64_t m,
                         std::optional<BlockScramble> scramble, std::span<std::uint32_t> out) {
    if (m == 0) throw std::invalid_argument("generate_block: m must be >= 1");
    constexpr std::uint64_t kMaxPoints = std::uint64_t{1} << kDigits;
    if (start >= kMaxPoints || m > kMaxPoints - start) {
        throw std::out_of_range("generate_block: points beyond index 2^32 requested");
    }
    const unsigned d = spec.dimension();
    if (out.size() != m * d) throw std::invalid_argument("generate_block: output span has the wrong size");

    for (unsigned k = 0; k < d; ++k) {
        const auto& v = spec.column(k);
        std::array<std::uint32_t, kDigits> prefix_xor{};
        std::uint32_t acc = 0;
        for (int j = 0; j < kDigits; ++j) prefix_xor[j] = acc ^= v[j];

        std::uint32_t x = 0;
        for (int j = 0; j < kDigits; ++j) {
            if ((start >> j) & 1u) x ^= v[j];
        }
        const std::uint64_t stream =
            scramble ? scramble_stream({scramble->seed, scramble->replicate, k}) : 0;
        for (std::uint64_t i = 0; i < m; ++i) {
            if (i > 0) x ^= prefix_xor[std::countr_zero(start + i)];
            out[i * d + k] = scramble ? owen_scramble(x, stream) : x;
        }
    }
}

PointBlock generate_block(const DigitalSequenceSpec& spec, std::uint64_t start, std::uint64_t m,
                          std::optional<BlockScramble> scramble) {
    const unsigned d = spec.dimension();
    std::vector<std::uint32_t> bits(m * d);
    generate_block_bits(spec, start, m, scramble, bits);
    PointBlock block;
    block.count = m;
    block.dimension = d;
    block.coords.resize(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) block.coords[i] = bits[i] * 0x1p-32;
    return block;
}

}  // namespace mlqmc::lds
