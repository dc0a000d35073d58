#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace butterfly {

/// Separates the pseudorandom streams drawn from one user seed.
enum class StreamDomain : std::uint16_t {
  kChannel = 1,
  kNoise = 2,
  kCodebook = 3,
  kMessage = 4,
  kSeedDerivation = 5,
};

/**
 * @brief ChaCha20 keystream addressed by (seed, domain, node, counter).
 *
 * Every (seed, domain, node, counter) tuple names an independent stream, so
 * noise at slot m of node k can be regenerated without touching any other
 * sample. Output is identical across platforms: only integer keystream bytes
 * and explicit floating-point transforms are used.
 */
class KeyedStream {
 public:
  KeyedStream(std::uint64_t seed, StreamDomain domain, std::uint16_t node,
              std::uint64_t counter);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  /// Circularly symmetric complex Gaussian with unit variance.
  std::complex<double> complex_gaussian();

 private:
  void refill();

  std::array<unsigned char, 32> key_{};
  std::array<unsigned char, 12> nonce_{};
  std::array<unsigned char, 64> block_{};
  std::uint32_t block_index_ = 0;
  std::size_t offset_ = 64;
};

/// Child seed for trial `index` of a Monte Carlo run keyed by `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace butterfly
