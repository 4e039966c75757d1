#pragma once

// Counter-based random streams. Every (master_seed, replicate_id, substream_id)
// triple addresses its own Philox4x32-10 sequence, so a replicate's draws do
// not depend on which worker runs it or in what order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "arratia/errors.hpp"

namespace arratia {

struct StreamKey {
  std::uint64_t master_seed = 0;
  std::uint64_t replicate_id = 0;
  std::uint64_t substream_id = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

namespace detail {

struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter round(Counter c, Key k) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  // Ten rounds with Weyl key schedule.
  static Counter generate(Counter c, Key k) {
    for (int r = 0; r < 10; ++r) {
      c = round(c, k);
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return c;
  }
};

// splitmix64 finalizer; decorrelates nearby master seeds before keying.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Raw 64-bit output and uniforms from one keyed stream.
class PhiloxStream {
 public:
  explicit PhiloxStream(const StreamKey& key) {
    if (key.replicate_id > 0xFFFFFFFFull || key.substream_id > 0xFFFFFFFFull) {
      throw ConfigError("replicate_id and substream_id must fit in 32 bits");
    }
    const std::uint64_t k = detail::mix64(key.master_seed);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    replicate_ = static_cast<std::uint32_t>(key.replicate_id);
    substream_ = static_cast<std::uint32_t>(key.substream_id);
  }

  std::uint64_t next_u64() {
    if (cursor_ == 2) refill();
    return buffer_[cursor_++];
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_open0() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill() {
    const detail::Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_),
                                          static_cast<std::uint32_t>(block_ >> 32), replicate_,
                                          substream_};
    const auto out = detail::Philox4x32::generate(ctr, key_);
    buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
    buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
    ++block_;
    cursor_ = 0;
  }

  detail::Philox4x32::Key key_{};
  std::uint32_t replicate_ = 0;
  std::uint32_t substream_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int cursor_ = 2;
};

// Standard normal deviates; Box-Muller on each counter block, no rejection.
class GaussianStream {
 public:
  explicit GaussianStream(const StreamKey& key) : bits_(key) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = bits_.uniform_open0();
    const double u2 = bits_.uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Uniform on [0, 1) from the same counter sequence.
  double uniform() { return bits_.uniform(); }

 private:
  PhiloxStream bits_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace arratia
