#pragma once

#include <cstddef>
#include <cstdint>

namespace rareyield {

/// Stateless counter-based generator. Every draw is a pure function of
/// (seed, stream, index, slot), so batches can be split across workers
/// without changing the numbers any sample sees.
class CounterRng {
 public:
  constexpr CounterRng() = default;
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Raw 64-bit word for sample `index`, slot `slot`.
  std::uint64_t bits(std::uint64_t index, std::uint64_t slot) const noexcept;

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t index, std::uint64_t slot) const noexcept;

  /// Standard normal. Slots are paired for Box-Muller: slots 2m and 2m+1
  /// share one pair of uniforms.
  double normal(std::uint64_t index, std::uint64_t slot) const noexcept;

  /// Fills `out` with standard normals for sample `index`; out[k] equals
  /// normal(index, k).
  void fill_normal(std::uint64_t index, double* out, std::size_t n) const noexcept;

  /// Independent child stream, keyed by `tag`.
  CounterRng substream(std::uint64_t tag) const noexcept;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
};

/// Sequential cursor over a CounterRng: hands out fresh sample indices.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : rng_(seed, stream) {}
  explicit RngStream(CounterRng rng) : rng_(rng) {}

  const CounterRng& rng() const noexcept { return rng_; }
  std::uint64_t position() const noexcept { return next_; }

  /// Reserves `count` consecutive indices and returns the first.
  std::uint64_t take(std::uint64_t count = 1) noexcept {
    const std::uint64_t first = next_;
    next_ += count;
    return first;
  }

  double uniform() noexcept { return rng_.uniform(take(), 0); }
  double normal() noexcept { return rng_.normal(take(), 0); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  RngStream fork(std::uint64_t tag) const noexcept {
    return RngStream(rng_.substream(tag));
  }

 private:
  CounterRng rng_;
  std::uint64_t next_ = 0;
};

}  // namespace rareyield
