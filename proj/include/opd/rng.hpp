// Counter-based RNG (Philox4x32-10) with per-task substreams.
//
// A stream is addressed by (seed, stream id): the seed forms the Philox key
// and the stream id occupies the high half of the 128-bit counter, so any
// number of streams drawn from one seed are independent and can be consumed
// in parallel without coupling draw order across tasks.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>

namespace opd {

class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    ctr_[0] = 0;
    ctr_[1] = 0;
    ctr_[2] = static_cast<std::uint32_t>(stream);
    ctr_[3] = static_cast<std::uint32_t>(stream >> 32);
  }

  std::uint32_t next_u32() {
    if (have_ == 0) refill();
    return buf_[4 - have_--];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on the open interval (0, 1); 53-bit resolution, never 0 or 1.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double z0, z1;
    box_muller(z0, z1);
    cached_ = z1;
    has_cached_ = true;
    return z0;
  }

  void fill_normal(double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) box_muller(out[i], out[i + 1]);
    if (i < n) out[i] = normal();
  }

  double uniform(double a, double b) { return a + uniform01() * (b - a); }

  // Integer in [0, m), m >= 1. Modulo bias is < 2^-32 for the m used here.
  std::uint64_t below(std::uint64_t m) { return next_u64() % m; }

 private:
  void box_muller(double& z0, double& z1) {
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    z0 = r * std::cos(a);
    z1 = r * std::sin(a);
  }

  void refill();

  std::uint32_t key_[2];
  std::uint32_t ctr_[4];
  std::uint32_t buf_[4] = {0, 0, 0, 0};
  int have_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Raw Philox block, exposed for known-answer tests.
inline void philox4x32_10_block(const std::uint32_t ctr[4], const std::uint32_t key[2],
                                std::uint32_t out[4]) {
  std::uint32_t c[4] = {ctr[0], ctr[1], ctr[2], ctr[3]};
  std::uint32_t k0 = key[0], k1 = key[1];
  for (int round = 0; round < 10; ++round) {
    std::uint64_t p0 = 0xD2511F53ULL * c[0];
    std::uint64_t p1 = 0xCD9E8D57ULL * c[2];
    std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0;
    std::uint32_t n1 = static_cast<std::uint32_t>(p1);
    std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1;
    std::uint32_t n3 = static_cast<std::uint32_t>(p0);
    c[0] = n0; c[1] = n1; c[2] = n2; c[3] = n3;
    k0 += 0x9E3779B9u;
    k1 += 0xBB67AE85u;
  }
  out[0] = c[0]; out[1] = c[1]; out[2] = c[2]; out[3] = c[3];
}

inline void PhiloxStream::refill() {
  philox4x32_10_block(ctr_, key_, buf_);
  have_ = 4;
  if (++ctr_[0] == 0) ++ctr_[1];  // low 64 bits count blocks; high half is the stream id
}

}  // namespace opd
