#pragma once

// Splittable counter-based random streams. SplitMix64: the state is a counter
// advanced by the golden-gamma increment and the output is a bijective hash of
// it, so (seed, stream) -> sequence is a pure function of two integers and
// bit-exact everywhere. Independent streams for independent paths come from
// hashing the stream id into the starting counter.
//
// Not cryptographic; statistical quality is ample for Monte Carlo at the
// sample sizes used here.

#include <cstdint>

namespace qjump {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : state_(detail::mix64(seed + 0x9E3779B97F4A7C15ull * (stream + 1)) ^
                 detail::mix64(stream + 0x632BE59BD9B4E019ull)) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return detail::mix64(state_);
    }

    // Uniform on [0,1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1), both endpoints excluded; safe under log().
    double uniform01_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  private:
    std::uint64_t state_;
};

// Fixed stream-id layout: purpose tag in the high bits, path index in the low
// bits, so the id space never collides between the realization sampler, the
// chain's outcome draws, and the bootstrap.
enum class StreamPurpose : std::uint64_t {
    realization = 1,
    chain = 2,
    state_sampling = 3,
    bootstrap = 4,
    scratch = 5,
};

inline std::uint64_t stream_id(StreamPurpose p, std::uint64_t index) {
    return (static_cast<std::uint64_t>(p) << 48) + index;
}

}  // namespace qjump
