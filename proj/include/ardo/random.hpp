#pragma once

#include <cstdint>
#include <random>

namespace ardo {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Seeded random stream that can be split into independent children.
///
/// A child is keyed on the parent's key and the child id only, never on how
/// many numbers the parent has drawn, so `split(i)` is reproducible no matter
/// which thread asks for it or when.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : RandomStream(Key{detail::splitmix64(seed)}) {}

  RandomStream split(std::uint64_t id) const {
    return RandomStream(Key{detail::splitmix64(key_ ^ detail::splitmix64(id + 0x632be59bd9b4e019ULL))});
  }

  std::uint64_t key() const noexcept { return key_; }

  /// Uniform on [0, 1).
  double uniform() { return uniform_(engine_); }

  /// Uniform on the open interval (0, 1).
  double open_uniform() {
    double u = 0.0;
    do {
      u = uniform_(engine_);
    } while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(engine_); }

  std::uint64_t next_u64() { return engine_(); }

 private:
  struct Key {
    std::uint64_t value;
  };

  explicit RandomStream(Key key) : key_(key.value) {
    std::seed_seq seq{static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ardo
