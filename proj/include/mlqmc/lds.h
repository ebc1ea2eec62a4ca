#pragma once

// Base-2 digital sequences (Sobol' construction), Owen nested uniform
// scrambling and the inverse normal transform.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace mlqmc::lds {

inline constexpr int kDigits = 32;

/// Generating values of a base-2 digital sequence.
///
/// `direction[k][j]` is the j-th direction number of coordinate k, scaled to a
/// 32-bit integer so that bit 31 is the first binary digit. Direction number j
/// (zero based) must have its lowest set bit at position 31 - j, which makes
/// the generator matrix upper triangular with a unit diagonal.
class DigitalSequenceSpec {
  public:
    using Column = std::array<std::uint32_t, kDigits>;

    DigitalSequenceSpec(std::vector<Column> direction, unsigned quality_t);

    /// Parses the `d s a m_1 ... m_s` table format (one header line, then one
    /// line per coordinate starting at coordinate 2). Coordinate 1 is the van
    /// der Corput sequence and is implicit.
    static DigitalSequenceSpec from_joe_kuo(std::istream& in, unsigned dimension);

    /// Sobol' sequence using the table bundled with the library.
    static const DigitalSequenceSpec& sobol(unsigned dimension);

    /// Largest dimension supported by the bundled table.
    static unsigned bundled_max_dimension();

    unsigned dimension() const { return static_cast<unsigned>(direction_.size()); }
    unsigned quality_t() const { return t_; }
    const Column& column(unsigned k) const { return direction_[k]; }

  private:
    std::vector<Column> direction_;
    unsigned t_ = 0;
};

/// Identifies one Owen scrambling of one coordinate.
struct ScrambleKey {
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    std::uint32_t dimension = 0;
};

/// Per-coordinate hash key derived from (seed, replicate, dimension).
std::uint64_t scramble_stream(const ScrambleKey& key);

/// Applies the nested uniform scramble identified by `stream` to 32 digits.
/// The flip applied to digit j depends on the j leading input digits only.
std::uint32_t owen_scramble(std::uint32_t x, std::uint64_t stream);

/// m points x d coordinates, row major, generation order preserved.
struct PointBlock {
    std::size_t count = 0;
    unsigned dimension = 0;
    std::vector<double> coords;

    std::span<const double> point(std::size_t i) const {
        return {coords.data() + i * dimension, dimension};
    }
    double operator()(std::size_t i, unsigned k) const { return coords[i * dimension + k]; }
};

/// Scrambling request for generate_block: a seed and replicate index; the
/// dimension index of each coordinate is filled in per coordinate.
struct BlockScramble {
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
};

/// Points start .. start+m-1 of the sequence, scrambled when `scramble` is set.
/// Throws std::invalid_argument for m == 0 and std::out_of_range when the
/// requested range leaves the first 2^32 points.
PointBlock generate_block(const DigitalSequenceSpec& spec, std::uint64_t start, std::uint64_t m,
                          std::optional<BlockScramble> scramble = std::nullopt);

/// Same as generate_block but writes into `out` (size m * dimension, row
/// major) without allocating. Coordinates are stored as 32-bit integers.
void generate_block_bits(const DigitalSequenceSpec& spec, std::uint64_t start, std::uint64_t m,
                         std::optional<BlockScramble> scramble, std::span<std::uint32_t> out);

/// Phi^{-1}(u). Acklam's rational approximation refined by one Halley step.
/// Throws std::domain_error unless 0 < u < 1.
double inverse_normal_cdf(double u);

/// Inverse normal without argument checking, for hot loops with u in (0,1).
double inverse_normal_cdf_unchecked(double u);

/// Standard normal CDF.
double normal_cdf(double x);

/// True iff every base-2 elementary interval of volume 2^(t-k) holds exactly
/// 2^t points. Throws std::invalid_argument unless the block has 2^k points
/// and k > t.
bool verify_net_balance(const PointBlock& block, unsigned k, unsigned t);

}  // namespace mlqmc::lds
