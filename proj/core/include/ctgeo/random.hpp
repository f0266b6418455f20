#pragma once

#include <cstdint>
#include <random>

namespace ctgeo {

/**
 * SplitMix64 (Steele, Lea & Flood). Used only to derive independent child
 * seeds, so that a single user seed fans out into reproducible streams.
 */
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// A generator seeded from the next output; the parent advances by one.
    SplitMix64 split() { return SplitMix64(next()); }

  private:
    std::uint64_t state_;
};

/**
 * One reproducible random stream: std::mt19937_64 (bit-exact by the C++
 * standard) seeded with a single 64-bit word, mapped to [0, 1) by taking the
 * top 53 bits. std::uniform_real_distribution is avoided because its output
 * is implementation-defined.
 */
class Stream {
  public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::uint64_t bits() { return engine_(); }

  private:
    std::mt19937_64 engine_;
};

/// Stream layout for motion sampling: SplitMix64(seed) outputs 1, 2, 3 seed
/// the alpha, tx and ty streams in that order.
struct MotionStreams {
    explicit MotionStreams(std::uint64_t seed);

    Stream alpha;
    Stream tx;
    Stream ty;
};

} // namespace ctgeo
