#include "plumeinv/special_functions.hpp"

#include <cmath>
#include <numbers>

namespace plumeinv {

namespace {

// Below this the direct product is accurate: exp(x^2) stays small enough that
// the rounding error of x*x does not matter and erfc(x) is far from underflow.
constexpr double kDirectLimit = 5.0;
constexpr int kFractionTerms = 60;

}  // namespace

double erfcx(double x) {
    if (std::isnan(x)) return x;
    if (x < kDirectLimit) return std::exp(x * x) * std::erfc(x);
    // Laplace continued fraction, evaluated bottom-up:
    // erfcx(x) = 1/sqrt(pi) * 1/(x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...))))
    double tail = x;
    for (int n = kFractionTerms; n >= 1; --n) tail = x + 0.5 * n / tail;
    return 1.0 / (std::sqrt(std::numbers::pi) * tail);
}

}  // namespace plumeinv
