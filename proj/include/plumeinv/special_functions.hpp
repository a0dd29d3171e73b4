#pragma once

namespace plumeinv {

// Scaled complementary error function exp(x^2) * erfc(x).
// Finite for every finite x where the result is representable; for large
// positive x it behaves like 1 / (x sqrt(pi)).
double erfcx(double x);

}  // namespace plumeinv
