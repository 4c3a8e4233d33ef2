#pragma once

// Counter-based random streams. Every draw is a pure function of
// (key, stream index, step index), so replicas can be generated in any order
// or on any thread and still reproduce bit-for-bit.

#include <array>
#include <cstdint>

#include "cusp/linalg.hpp"

namespace cusp::rng {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter apply(Counter ctr, Key key);
};

std::uint64_t splitmix64(std::uint64_t x);

/// A 64-bit stream key. `split` derives statistically independent child keys,
/// which is how experiments carve a single seed into per-purpose streams.
class StreamKey
{
  public:
    constexpr StreamKey() = default;
    explicit constexpr StreamKey(std::uint64_t seed) : value_(seed) {}

    [[nodiscard]] StreamKey split(std::uint64_t tag) const;
    [[nodiscard]] constexpr std::uint64_t value() const { return value_; }

    friend constexpr bool operator==(StreamKey, StreamKey) = default;

  private:
    std::uint64_t value_ = 0;
};

/// One replica's noise source: draw k is keyed by (key, index, k).
class Stream
{
  public:
    Stream(StreamKey key, std::uint64_t index) : key_(key), index_(index) {}

    /// Four raw 32-bit words for draw `step`.
    [[nodiscard]] Philox4x32::Counter raw(std::uint64_t step) const;

    /// Two uniforms in (0, 1), 53-bit resolution.
    [[nodiscard]] std::array<double, 2> uniform2(std::uint64_t step) const;

    /// Two independent standard normals (Box-Muller on `uniform2(step)`).
    [[nodiscard]] Vec2 normal2(std::uint64_t step) const;

    [[nodiscard]] StreamKey key() const { return key_; }
    [[nodiscard]] std::uint64_t index() const { return index_; }

  private:
    StreamKey key_;
    std::uint64_t index_;
};

}  // namespace cusp::rng
