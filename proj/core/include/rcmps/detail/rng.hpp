#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rcmps/detail/types.hpp"

namespace rcmps::detail {

// mt19937_64 with hand-rolled uniform/normal maps so that streams are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Complex cnormal() {  // complex standard normal, E|z|^2 = 1
    double re = normal(), im = normal();
    return Complex(re, im) * M_SQRT1_2;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0;
  bool have_spare_ = false;
};

}  // namespace rcmps::detail
