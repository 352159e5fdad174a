#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "topicopt/special_math.hpp"

#include <cmath>
#include <stdexcept>

using topicopt::digamma;
using topicopt::log_gamma;

namespace {
double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1e-12, std::abs(want));
}
}  // namespace

TEST_CASE("log_gamma matches the standard library across magnitudes") {
    const double xs[] = {1e-3, 0.1,  0.5,   1.0, 1.5, 2.0, 3.7,
                         9.99, 10.0, 123.4, 1e4, 1e8};
    for (double x : xs) {
        const double want = std::lgamma(x);
        CHECK(std::abs(log_gamma(x) - want) <
              1e-11 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("log_gamma hits exact factorial points") {
    // Gamma(n) = (n-1)!
    CHECK(std::abs(log_gamma(1.0)) < 1e-11);
    CHECK(std::abs(log_gamma(2.0)) < 1e-11);
    CHECK(std::abs(log_gamma(5.0) - std::log(24.0)) < 1e-11);
    // Gamma(1/2) = sqrt(pi)
    CHECK(std::abs(log_gamma(0.5) -
                   0.5 * std::log(3.14159265358979323846)) < 1e-11);
}

TEST_CASE("digamma known values") {
    // psi(1) = -gamma_E, psi(0.5) = -gamma_E - 2 ln 2
    const double euler = 0.57721566490153286061;
    CHECK(digamma(1.0) == doctest::Approx(-euler).epsilon(1e-12));
    CHECK(digamma(0.5) ==
          doctest::Approx(-euler - 2.0 * std::log(2.0)).epsilon(1e-12));
    // psi(2) = 1 - gamma_E
    CHECK(digamma(2.0) == doctest::Approx(1.0 - euler).epsilon(1e-12));
}

TEST_CASE("digamma satisfies the recurrence psi(x+1) = psi(x) + 1/x") {
    const double xs[] = {0.01, 0.3, 1.0, 2.5, 7.0, 9.5, 42.0, 1e3};
    for (double x : xs) {
        CHECK(rel_err(digamma(x + 1.0), digamma(x) + 1.0 / x) < 1e-12);
    }
}

TEST_CASE("digamma is the derivative of log_gamma") {
    const double xs[] = {0.7, 1.3, 4.0, 11.0, 250.0};
    for (double x : xs) {
        const double h = 1e-6 * std::max(1.0, x);
        const double fd = (log_gamma(x + h) - log_gamma(x - h)) / (2.0 * h);
        CHECK(rel_err(digamma(x), fd) < 1e-7);
    }
}

TEST_CASE("digamma grows like log for large arguments") {
    // psi(x) = ln x - 1/(2x) + O(1/x^2)
    const double x = 1e6;
    CHECK(rel_err(digamma(x), std::log(x) - 0.5 / x) < 1e-10);
    CHECK(digamma(1e8) < std::log(1e8));
}

TEST_CASE("non-positive arguments are rejected") {
    CHECK_THROWS_AS(digamma(0.0), std::domain_error);
    CHECK_THROWS_AS(digamma(-1.5), std::domain_error);
    CHECK_THROWS_AS(log_gamma(0.0), std::domain_error);
    CHECK_THROWS_AS(log_gamma(-3.0), std::domain_error);
}

TEST_CASE("digamma is increasing on the positive axis") {
    double prev = digamma(0.05);
    for (double x = 0.1; x < 20.0; x += 0.05) {
        const double cur = digamma(x);
        CHECK(cur > prev);
        prev = cur;
    }
}
