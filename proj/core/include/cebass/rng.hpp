#pragma once

#include <array>
#include <cstdint>

namespace cebass {

/// Deterministic random stream with cheap substream forking.
///
/// Every consumer of randomness takes an explicit Rng handle; callers shard a
/// seeded master generator into per-particle / per-replication substreams so
/// results are reproducible independently of evaluation order or thread
/// count. The engine is xoshiro256++ seeded through splitmix64, which makes a
/// fork a handful of integer mixes rather than a full generator reseed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Child stream keyed by up to three coordinates (time step, particle
  /// index, stratum...). Forking does not consume parent draws; the child
  /// depends only on the parent's seed and the keys.
  Rng fork(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal (polar method).
  double normal();
  /// Gamma(shape, rate) via the Marsaglia-Tsang squeeze, with the
  /// shape-boost for shape < 1.
  double gamma(double shape, double rate);

 private:
  static std::uint64_t mix(std::uint64_t x);
  void seed_state(std::uint64_t key);

  std::uint64_t key_ = 0;
  std::array<std::uint64_t, 4> state_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cebass
