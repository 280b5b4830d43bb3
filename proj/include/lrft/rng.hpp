#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "lrft/matcore.hpp"

namespace lrft {

/// Names a reproducible random stream. Two handles with equal (seed,
/// stream_id) produce the same sequence on every platform.
struct RngHandle {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  /// Derives an independent sub-stream, e.g. one per role or per draw.
  RngHandle child(std::uint64_t tag) const;

  friend bool operator==(const RngHandle&, const RngHandle&) = default;
};

/// Stream roles used when deriving handles for task and data generation.
enum class StreamRole : std::uint64_t {
  kTask = 1,
  kPretrained = 2,
  kFeatures = 3,
  kNoise = 4,
  kSolver = 5,
  kMonteCarlo = 6,
};

RngHandle stream_for(std::uint64_t base_seed, std::initializer_list<std::uint64_t> keys);

inline RngHandle stream_for(std::uint64_t base_seed, std::uint64_t seed_index, StreamRole role) {
  return stream_for(base_seed, {seed_index, static_cast<std::uint64_t>(role)});
}

std::uint64_t splitmix64(std::uint64_t x);

/// Sequential generator bound to one stream.
///
/// std::mt19937_64 output is fixed by the standard; the standard normal
/// transform is done here (Box-Muller) because std::normal_distribution is
/// implementation-defined.
class Generator {
 public:
  explicit Generator(RngHandle h);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();

  /// rows x cols i.i.d. N(0, 1), filled column by column so that a wider
  /// draw extends a narrower one from the same stream.
  Mat gaussian(Index rows, Index cols);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lrft
