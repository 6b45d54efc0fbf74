#include "salem/rng.hpp"

#include <cmath>
#include <numbers>

namespace salem {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

Stream::Stream(std::uint64_t key) : key_(key), engine_(splitmix64(key)) {}

Stream Stream::split(std::string_view label, std::uint64_t index) const {
  return Stream(splitmix64(splitmix64(key_ ^ fnv1a(label)) + splitmix64(index + 0x632be59bd9b4e019ULL)));
}

double Stream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Stream::uniform_open(double a, double b) {
  for (;;) {
    const double v = a + (b - a) * uniform();
    if (v > a && v < b) return v;
  }
}

double Stream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  spare_ = rad * std::sin(ang);
  has_spare_ = true;
  return rad * std::cos(ang);
}

double hash_uniform(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t h = splitmix64(splitmix64(key ^ splitmix64(a)) ^ (b * 0xd1b54a32d192ed03ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace salem
