#include "topdown/random.h"

namespace topdown {
namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t SplitMix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t HashBytes(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // Length is folded in so that "" and "\0" differ.
  return SplitMix(h ^ (bytes.size() * kGamma));
}

std::uint64_t MixKey(std::uint64_t key, std::uint64_t value) {
  return SplitMix(key ^ SplitMix(value + kGamma));
}

std::uint64_t MixKey(std::uint64_t key, std::string_view value) {
  return MixKey(key, HashBytes(value));
}

std::uint64_t KeyedRng::Next() {
  ++counter_;
  return SplitMix(key_ + counter_ * kGamma);
}

std::uint64_t KeyedRng::UniformBelow(std::uint64_t bound) {
  // Lemire-style rejection keeps the result exactly uniform.
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = Next();
    if (r >= threshold) return r % bound;
  }
}

unsigned __int128 KeyedRng::UniformBelow128(unsigned __int128 bound) {
  if (bound >> 64 == 0) {
    return UniformBelow(static_cast<std::uint64_t>(bound));
  }
  const unsigned __int128 threshold =
      (static_cast<unsigned __int128>(0) - bound) % bound;
  while (true) {
    const unsigned __int128 r =
        (static_cast<unsigned __int128>(Next()) << 64) | Next();
    if (r >= threshold) return r % bound;
  }
}

double KeyedRng::UniformDouble() {
  return static_cast<double>(Next() >> 11) * 0x1.0p-53;
}

}  // namespace topdown
