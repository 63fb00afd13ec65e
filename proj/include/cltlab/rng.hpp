#pragma once

#include <array>
#include <cstdint>

namespace cltlab {

// Counter-based RNG (Philox4x32-10).  Every draw is a pure function of
// (seed, stream, index), so results never depend on evaluation order or on
// how work is sliced across threads.
namespace philox {

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  uint64_t prod = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(prod >> 32);
  lo = static_cast<uint32_t>(prod);
}

inline std::array<uint32_t, 4> block(uint64_t key, uint64_t counter_hi,
                                     uint64_t counter_lo) {
  constexpr uint32_t kMul0 = 0xD2511F53u;
  constexpr uint32_t kMul1 = 0xCD9E8D57u;
  constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr uint32_t kWeyl1 = 0xBB67AE85u;

  uint32_t c0 = static_cast<uint32_t>(counter_lo);
  uint32_t c1 = static_cast<uint32_t>(counter_lo >> 32);
  uint32_t c2 = static_cast<uint32_t>(counter_hi);
  uint32_t c3 = static_cast<uint32_t>(counter_hi >> 32);
  uint32_t k0 = static_cast<uint32_t>(key);
  uint32_t k1 = static_cast<uint32_t>(key >> 32);

  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c0, hi0, lo0);
    mulhilo(kMul1, c2, hi1, lo1);
    uint32_t n0 = hi1 ^ c1 ^ k0;
    uint32_t n1 = lo1;
    uint32_t n2 = hi0 ^ c3 ^ k1;
    uint32_t n3 = lo0;
    c0 = n0; c1 = n1; c2 = n2; c3 = n3;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return {c0, c1, c2, c3};
}

}  // namespace philox

// SplitMix64 finalizer, used to derive independent keys/streams from a seed.
inline uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t tag, uint64_t index = 0) {
  return mix64(seed ^ mix64(tag + 0x632BE59BD9B4E019ull) ^ mix64(index));
}

double normal_quantile(double p);  // numerics.cpp (AS241)

// Indexed access into one Philox stream: uniform(i) and normal(i) are pure
// functions of (seed, stream, i).
class RandomStream {
 public:
  RandomStream(uint64_t seed, uint64_t stream = 0)
      : key_(mix64(seed) ^ mix64(stream * 0x9E3779B97F4A7C15ull + 1)),
        stream_(stream) {}

  // open (0,1), 53-bit resolution
  double uniform(uint64_t i) const {
    return (static_cast<double>(word(i) >> 11) + 0.5) * 0x1p-53;
  }

  double normal(uint64_t i) const { return normal_quantile(uniform(i)); }

  uint64_t word(uint64_t i) const {
    auto b = philox::block(key_, stream_, i >> 1);
    if (i & 1) return (static_cast<uint64_t>(b[3]) << 32) | b[2];
    return (static_cast<uint64_t>(b[1]) << 32) | b[0];
  }

 private:
  uint64_t key_;
  uint64_t stream_;
};

// Sequential convenience wrapper when indexed addressing is not needed.
class SeqRng {
 public:
  explicit SeqRng(uint64_t seed, uint64_t stream = 0) : s_(seed, stream) {}
  double uniform() { return s_.uniform(i_++); }
  double normal() { return s_.normal(i_++); }
  const RandomStream& stream() const { return s_; }

 private:
  RandomStream s_;
  uint64_t i_ = 0;
};

}  // namespace cltlab
