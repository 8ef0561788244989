#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace isocrit {

/// SplitMix64 generator. Satisfies UniformRandomBitGenerator, so it plugs
/// into the <random> distributions. Cheap to construct, which lets every
/// replicate and every population unit own an independent stream.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Mixes a root seed with a path of stream identifiers (purpose tag,
/// replicate index, unit index, ...) into a seed for an independent stream.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = root ^ 0x6A09E667F3BCC909ULL;
  for (std::uint64_t part : path) {
    SplitMix64 mix(h ^ (part * 0xD1B54A32D192ED03ULL));
    h = mix();
  }
  return h;
}

/// Stream tags used by derive_seed.
enum StreamTag : std::uint64_t {
  kPopulationStream = 1,
  kSampleStream = 2,
  kConditionalStream = 3,
  kPseStream = 4,
};

}  // namespace isocrit
