#include "cusp/rng.hpp"

#include <cmath>
#include <numbers>

namespace cusp::rng {

namespace {

constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;
constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint32_t hi, std::uint32_t lo)
{
    // top 53 bits, shifted by half an ulp so 0 and 1 are never produced
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::apply(Counter ctr, Key key)
{
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMulA, ctr[0], hi0, lo0);
        mulhilo(kMulB, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x)
{
    std::uint64_t z = x + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

StreamKey StreamKey::split(std::uint64_t tag) const
{
    return StreamKey(splitmix64(value_ ^ splitmix64(tag + 0x632be59bd9b4e019ull)));
}

Philox4x32::Counter Stream::raw(std::uint64_t step) const
{
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step),
                                  static_cast<std::uint32_t>(step >> 32),
                                  static_cast<std::uint32_t>(index_),
                                  static_cast<std::uint32_t>(index_ >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(key_.value()),
                              static_cast<std::uint32_t>(key_.value() >> 32)};
    return Philox4x32::apply(ctr, key);
}

std::array<double, 2> Stream::uniform2(std::uint64_t step) const
{
    const auto w = raw(step);
    return {to_open_unit(w[0], w[1]), to_open_unit(w[2], w[3])};
}

Vec2 Stream::normal2(std::uint64_t step) const
{
    const auto [u1, u2] = uniform2(step);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace cusp::rng
