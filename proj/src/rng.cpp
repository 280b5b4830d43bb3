#include "lrft/rng.hpp"

#include <cmath>
#include <numbers>

namespace lrft {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngHandle RngHandle::child(std::uint64_t tag) const {
  return {seed, splitmix64(stream_id ^ splitmix64(tag + 0x632be59bd9b4e019ULL))};
}

RngHandle stream_for(std::uint64_t base_seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t id = 0x853c49e6748fea9bULL;
  for (std::uint64_t k : keys) id = splitmix64(id ^ splitmix64(k));
  return {base_seed, id};
}

Generator::Generator(RngHandle h)
    : engine_(splitmix64(h.seed) ^ splitmix64(h.stream_id + 0x9e3779b97f4a7c15ULL)) {}

double Generator::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Generator::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Mat Generator::gaussian(Index rows, Index cols) {
  Mat out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = normal();
  }
  return out;
}

}  // namespace lrft
