#include "rareyield/rng.hpp"

#include <cmath>
#include <numbers>

namespace rareyield {
namespace {

constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t CounterRng::bits(std::uint64_t index,
                               std::uint64_t slot) const noexcept {
  std::uint64_t h = mix(seed_);
  h = mix(h ^ stream_);
  h = mix(h ^ index);
  return mix(h ^ slot);
}

double CounterRng::uniform(std::uint64_t index,
                           std::uint64_t slot) const noexcept {
  // 53 random bits, offset by half an ulp so 0 and 1 are excluded.
  return (static_cast<double>(bits(index, slot) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t index,
                          std::uint64_t slot) const noexcept {
  const std::uint64_t pair = slot >> 1;
  const double u1 = uniform(index, 2 * pair);
  const double u2 = uniform(index, 2 * pair + 1);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (slot & 1) ? radius * std::sin(angle) : radius * std::cos(angle);
}

void CounterRng::fill_normal(std::uint64_t index, double* out,
                             std::size_t n) const noexcept {
  for (std::size_t k = 0; k < n; k += 2) {
    const double u1 = uniform(index, k);
    const double u2 = uniform(index, k + 1);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[k] = radius * std::cos(angle);
    if (k + 1 < n) out[k + 1] = radius * std::sin(angle);
  }
}

CounterRng CounterRng::substream(std::uint64_t tag) const noexcept {
  return CounterRng(seed_, mix(stream_ ^ mix(tag + 0x632be59bd9b4e019ULL)));
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift; bias is < n / 2^64, irrelevant here.
  const unsigned __int128 product =
      static_cast<unsigned __int128>(rng_.bits(take(), 1)) * n;
  return static_cast<std::uint64_t>(product >> 64);
}

}  // namespace rareyield
