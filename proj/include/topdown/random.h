#ifndef TOPDOWN_RANDOM_H_
#define TOPDOWN_RANDOM_H_

#include <cstdint>
#include <limits>
#include <string_view>

namespace topdown {

// Stable 64-bit key hashing (FNV-1a followed by a SplitMix finalizer), used to
// derive independent random streams from (seed, geocode, query, cell) paths.
std::uint64_t HashBytes(std::string_view bytes);
std::uint64_t MixKey(std::uint64_t key, std::uint64_t value);
std::uint64_t MixKey(std::uint64_t key, std::string_view value);

// Counter-based stream: output i is SplitMix64 applied to key + i * gamma.
// Streams for distinct keys are independent for all practical purposes and
// the draws never depend on thread scheduling.
class KeyedRng {
 public:
  using result_type = std::uint64_t;

  explicit KeyedRng(std::uint64_t key) : key_(key) {}

  // Convenience: key derived from a seed and any number of path components.
  template <typename... Parts>
  static KeyedRng ForPath(std::uint64_t seed, const Parts&... parts) {
    std::uint64_t key = MixKey(0x6a09e667f3bcc908ULL, seed);
    ((key = MixKey(key, parts)), ...);
    return KeyedRng(key);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return Next(); }
  std::uint64_t Next();

  // Uniform integer in [0, bound); bound > 0.
  std::uint64_t UniformBelow(std::uint64_t bound);
  unsigned __int128 UniformBelow128(unsigned __int128 bound);

  // Uniform double in [0, 1) with 53 random bits.
  double UniformDouble();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace topdown

#endif  // TOPDOWN_RANDOM_H_
