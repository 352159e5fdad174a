#pragma once

namespace topicopt {

// digamma(x) for x > 0; asymptotic series after shifting into x >= 10.
double digamma(double x);

// log Gamma(x) for x > 0 via Stirling series, same shift technique.
double log_gamma(double x);

}  // namespace topicopt
