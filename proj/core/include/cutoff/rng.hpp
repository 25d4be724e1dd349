#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace cutoff {

// Philox4x64-10 counter-based generator. Output for a given
// (counter, key) pair is a pure function, so per-path streams keyed by
// (seed, path) are reproducible independently of execution order.
// Matches numpy.random.Philox word for word.
struct Philox4x64 {
  using u64 = std::uint64_t;

  static std::array<u64, 4> block(std::array<u64, 4> ctr, std::array<u64, 2> key) {
    constexpr u64 kMul0 = 0xD2E7470EE14C6C93ull;
    constexpr u64 kMul1 = 0xCA5A826395121157ull;
    constexpr u64 kWeyl0 = 0x9E3779B97F4A7C15ull;
    constexpr u64 kWeyl1 = 0xBB67AE8584CAA73Bull;
    for (int round = 0; round < 10; ++round) {
      const u64 lo0 = mulhilo(kMul0, ctr[0], ctr[0]);
      const u64 lo1 = mulhilo(kMul1, ctr[2], ctr[2]);
      ctr = {ctr[2] ^ ctr[1] ^ key[0], lo1, ctr[0] ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static u64 mulhilo(u64 a, u64 b, u64& hi_out) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi_out = static_cast<u64>(p >> 64);
    return static_cast<u64>(p);
  }
};

/// Deterministic stream of uniforms / standard normals keyed by
/// (seed, stream). Draw n is a function of (seed, stream, n) only.
class RandomStream {
 public:
  using u64 = std::uint64_t;

  RandomStream(u64 seed, u64 stream) : key_{seed, stream} {}

  /// Uniform on (0, 1].
  double uniform() {
    if (word_pos_ == 4) refill();
    const u64 w = words_[word_pos_++];
    return (static_cast<double>(w >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; draws two uniforms per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  u64 raw() {
    if (word_pos_ == 4) refill();
    return words_[word_pos_++];
  }

 private:
  void refill() {
    words_ = Philox4x64::block({block_index_++, 0, 0, 0}, key_);
    word_pos_ = 0;
  }

  std::array<u64, 2> key_;
  u64 block_index_ = 0;
  std::array<u64, 4> words_{};
  int word_pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// SplitMix64 step; used to derive sub-seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace cutoff
