#include "mkme/rng.hpp"

namespace mkme {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
  // FNV-1a over the purpose tag, then fold in seed and index through the mixer.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t k = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  k = mix64(k ^ h);
  k = mix64(k ^ (index * 0x9e3779b97f4a7c15ULL + 0x3c6ef372fe94f82bULL));
  return k;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = max() - (max() % bound + 1) % bound;
  for (;;) {
    const std::uint64_t r = (*this)();
    if (r <= limit) return r % bound;
  }
}

}  // namespace mkme
