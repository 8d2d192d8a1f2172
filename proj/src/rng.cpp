#include "plabel/rng.hpp"

#include <boost/random/beta_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "plabel/digest.hpp"

namespace plabel {

Rng Rng::keyed(std::uint64_t seed,
               std::initializer_list<std::string_view> labels,
               std::uint64_t index) {
  Sha256 h;
  h.field(seed);
  for (auto label : labels) h.field(label);
  h.field(index);
  return Rng(h.first_u64());
}

double Rng::uniform() {
  boost::random::uniform_01<double> d;
  return d(engine_);
}

double Rng::uniform(double lo, double hi) {
  boost::random::uniform_real_distribution<double> d(lo, hi);
  return d(engine_);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  boost::random::uniform_int_distribution<std::uint64_t> d(0, n - 1);
  return d(engine_);
}

double Rng::normal() {
  boost::random::normal_distribution<double> d(0.0, 1.0);
  return d(engine_);
}

double Rng::beta(double alpha, double beta) {
  boost::random::beta_distribution<double> d(alpha, beta);
  return d(engine_);
}

std::uint64_t Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  boost::random::poisson_distribution<std::uint64_t, double> d(mean);
  return d(engine_);
}

}  // namespace plabel
