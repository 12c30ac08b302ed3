#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "shapegen/core.hpp"

namespace shapegen::util {

// Standard-normal stream via Box-Muller on mt19937_64. std::normal_distribution
// is implementation-defined, this is not: same seed, same sequence, everywhere
// the same libm runs.
class NormalSampler {
  public:
    explicit NormalSampler(std::uint64_t seed) : eng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1p-53; // (0,1]
        double u2 = static_cast<double>(eng_() >> 11) * 0x1p-53;        // [0,1)
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace shapegen::util
