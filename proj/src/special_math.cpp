#include "topicopt/special_math.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace topicopt {

double digamma(double x) {
    if (!(x > 0.0)) {
        throw std::domain_error("digamma: argument must be positive");
    }
    double result = 0.0;
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    // psi(x) ~ ln x - 1/(2x) - sum B_2n / (2n x^2n)
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                    inv2 * (1.0 / 252.0 -
                    inv2 * (1.0 / 240.0 -
                    inv2 * (1.0 / 132.0)))));
    result += std::log(x) - 0.5 * inv - series;
    return result;
}

double log_gamma(double x) {
    if (!(x > 0.0)) {
        throw std::domain_error("log_gamma: argument must be positive");
    }
    // Shift into the asymptotic regime, dividing out Gamma(x+1) = x Gamma(x).
    double shift = 0.0;
    while (x < 10.0) {
        shift -= std::log(x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = inv * (1.0 / 12.0 -
                    inv2 * (1.0 / 360.0 -
                    inv2 * (1.0 / 1260.0 -
                    inv2 * (1.0 / 1680.0))));
    const double half_log_2pi = 0.91893853320467274178;
    return shift + (x - 0.5) * std::log(x) - x + half_log_2pi + series;
}

}  // namespace topicopt
