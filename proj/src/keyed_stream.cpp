#include "butterfly/keyed_stream.hpp"

#include <sodium.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace butterfly {

namespace {

void ensure_sodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) throw std::runtime_error("libsodium initialisation failed");
}

template <std::size_t N>
void store_le(std::array<unsigned char, N>& out, std::size_t at, std::uint64_t value,
              std::size_t bytes) {
  for (std::size_t i = 0; i < bytes; ++i) out[at + i] = static_cast<unsigned char>(value >> (8 * i));
}

}  // namespace

KeyedStream::KeyedStream(std::uint64_t seed, StreamDomain domain, std::uint16_t node,
                         std::uint64_t counter) {
  ensure_sodium();
  store_le(key_, 0, seed, 8);
  store_le(nonce_, 0, static_cast<std::uint16_t>(domain), 2);
  store_le(nonce_, 2, node, 2);
  store_le(nonce_, 4, counter, 8);
}

void KeyedStream::refill() {
  crypto_stream_chacha20_ietf_xor_ic(block_.data(), std::array<unsigned char, 64>{}.data(),
                                     block_.size(), nonce_.data(), block_index_++, key_.data());
  offset_ = 0;
}

std::uint64_t KeyedStream::next_u64() {
  if (offset_ + 8 > block_.size()) refill();
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < 8; ++i) value |= std::uint64_t{block_[offset_ + i]} << (8 * i);
  offset_ += 8;
  return value;
}

double KeyedStream::uniform_open() {
  // 53 random mantissa bits centred in their cell, never 0 or 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
}

std::complex<double> KeyedStream::complex_gaussian() {
  const double radius = std::sqrt(-std::log(uniform_open()));
  const double angle = 2.0 * std::numbers::pi * uniform_open();
  return std::polar(radius, angle);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return KeyedStream(seed, StreamDomain::kSeedDerivation, 0, index).next_u64();
}

}  // namespace butterfly
