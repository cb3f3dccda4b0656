#pragma once

#include <cstdint>
#include <limits>

namespace rwre {

/// Counter-based 64-bit generator ("splitmix64-ctr").
///
/// Output k of stream s under key seed is
///   mix(mix(seed ^ mix(s + 0x632be59bd9b4e019)) + (k + 1) * 0x9e3779b97f4a7c15)
/// where mix is the SplitMix64 finalizer. Nothing but (seed, stream, counter)
/// enters an output, so replicas and sites draw from disjoint, reproducible
/// streams and a stream can be re-entered at any counter.
class CounterRng {
public:
    using result_type = std::uint64_t;

    static constexpr const char* algorithm = "splitmix64-ctr";

    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    constexpr std::uint64_t at(std::uint64_t counter) const noexcept {
        return mix(key_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
    }

    constexpr std::uint64_t operator()() noexcept { return at(counter_++); }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace rwre
