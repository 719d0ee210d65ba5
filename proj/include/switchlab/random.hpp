#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace switchlab {

/// Philox4x32-10 counter-based generator.
///
/// Stream layout: key = 64-bit master seed (low word k0, high word k1);
/// counter = (block index as two low words, stream id as two high words).
/// Block i of stream s is therefore philox(key = seed, ctr = {i_lo, i_hi,
/// s_lo, s_hi}), and each block yields two 64-bit draws (x1:x0, x3:x2).
/// Uniforms use the top 53 bits: ((u >> 11) + 0.5) * 2^-53, strictly inside
/// (0, 1). Exponentials are -log(1 - u) / rate. Nothing goes through
/// <random> distributions, so the draw sequence is fixed by this header.
class Philox {
public:
    using Block = std::array<std::uint32_t, 4>;

    Philox(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    static Block block(Block ctr, std::uint32_t k0, std::uint32_t k1) {
        for (int r = 0; r < 10; ++r) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0, static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1, static_cast<std::uint32_t>(p0)};
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return ctr;
    }

    std::uint64_t next_u64() {
        if (have_ == 0) {
            const Block out = block({static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32),
                                     static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                                    static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32));
            ++index_;
            buf_[0] = (std::uint64_t{out[1]} << 32) | out[0];
            buf_[1] = (std::uint64_t{out[3]} << 32) | out[2];
            have_ = 2;
        }
        return buf_[2 - have_--];
    }

    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    /// Index in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    std::uint64_t blocks_used() const { return index_; }

private:
    std::uint64_t seed_, stream_;
    std::uint64_t index_ = 0;
    std::array<std::uint64_t, 2> buf_{};
    int have_ = 0;
};

/// Stream id of chain `chain` within sub-run `subrun`.
inline std::uint64_t stream_id(std::uint32_t subrun, std::uint32_t chain) {
    return (std::uint64_t{subrun} << 32) | chain;
}

/// Seed of sub-run `index` derived from a master seed (one Philox block
/// keyed by the master seed on a reserved stream).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    const auto b = Philox::block({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                                  0xFFFFFFFFu, 0xFFFFFFFFu},
                                 static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32));
    return (std::uint64_t{b[1]} << 32) | b[0];
}

}  // namespace switchlab
