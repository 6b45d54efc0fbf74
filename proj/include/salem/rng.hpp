#pragma once
// Seeded random streams with stable labeled splitting.

#include <cstdint>
#include <random>
#include <string_view>

namespace salem {

std::uint64_t splitmix64(std::uint64_t x);

// A stream is identified by a 64-bit key. split() derives child keys from
// (key, label, index) only, never from how many draws the parent made, so
// results are independent of evaluation order and thread count.
class Stream {
 public:
  explicit Stream(std::uint64_t key = 0);

  Stream split(std::string_view label, std::uint64_t index = 0) const;
  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on the open interval (a, b); never returns an endpoint.
  double uniform_open(double a, double b);
  bool coin() { return (engine_() >> 63) != 0; }
  // Standard normal by Box-Muller; deterministic given the draw count.
  double normal();

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stateless draw in [0, 1) keyed by (key, a, b); used for per-sample jitter.
double hash_uniform(std::uint64_t key, std::uint64_t a, std::uint64_t b);

}  // namespace salem
