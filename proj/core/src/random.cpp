#include "ctgeo/random.hpp"

namespace ctgeo {

namespace {

std::uint64_t nth_child(std::uint64_t seed, int n) {
    SplitMix64 sm(seed);
    std::uint64_t out = 0;
    for (int i = 0; i <= n; ++i) {
        out = sm.next();
    }
    return out;
}

} // namespace

MotionStreams::MotionStreams(std::uint64_t seed)
    : alpha(nth_child(seed, 0)), tx(nth_child(seed, 1)), ty(nth_child(seed, 2)) {}

} // namespace ctgeo
