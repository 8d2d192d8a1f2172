#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

#include <boost/random/mersenne_twister.hpp>

namespace plabel {

// Seeded, portable random stream. The engine is MT19937-64 and every
// distribution comes from Boost.Random, whose algorithms are fixed in the
// headers rather than left to the standard library vendor; a given seed
// therefore replays identically on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Substream keyed by a list of labels, e.g. {seed, "tp", image_id}. The
  // key is hashed, so streams for distinct keys are independent and do not
  // depend on the order in which they are created.
  static Rng keyed(std::uint64_t seed,
                   std::initializer_list<std::string_view> labels,
                   std::uint64_t index = 0);

  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);      // [lo, hi)
  std::uint64_t uniform_int(std::uint64_t n);  // [0, n)
  double normal();                           // N(0, 1)
  double beta(double alpha, double beta);
  std::uint64_t poisson(double mean);

  boost::random::mt19937_64& engine() { return engine_; }

 private:
  boost::random::mt19937_64 engine_;
};

}  // namespace plabel
