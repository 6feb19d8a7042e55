#include "lfads/special_functions.hpp"

#include <cmath>
#include <string>

#include "lfads/errors.hpp"

namespace lfads {

namespace {

void check_domain(const char* fn, double x) {
  if (!std::isfinite(x) || x <= 0.0)
    throw ValueError(std::string(fn) + ": argument must be finite and > 0, got " + std::to_string(x));
}

constexpr double kLanczosG = 7.0;
constexpr double kLanczos[9] = {
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
};

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ln(2*pi)/2

}  // namespace

double lgamma_pos(double x) {
  check_domain("lgamma", x);
  if (x < 0.5) {
    // Reflection; sin(pi*x) > 0 for x in (0, 0.5).
    return std::log(M_PI / std::sin(M_PI * x)) - lgamma_pos(1.0 - x);
  }
  const double z = x - 1.0;
  double a = kLanczos[0];
  for (int i = 1; i < 9; ++i) a += kLanczos[i] / (z + i);
  const double t = z + kLanczosG + 0.5;
  return kHalfLog2Pi + (z + 0.5) * std::log(t) - t + std::log(a);
}

double digamma_pos(double x) {
  check_domain("digamma", x);
  double result = 0.0;
  // psi(x) = psi(x+1) - 1/x until the asymptotic series is accurate.
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // ln x - 1/(2x) - sum B_2n / (2n x^(2n))
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 -
                                            inv2 * (1.0 / 132.0 -
                                                    inv2 * (691.0 / 32760.0))))));
  return result;
}

double trigamma_pos(double x) {
  check_domain("trigamma", x);
  double result = 0.0;
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += inv * (1.0 +
                   inv * (0.5 +
                          inv * (1.0 / 6.0 -
                                 inv2 * (1.0 / 30.0 -
                                         inv2 * (1.0 / 42.0 -
                                                 inv2 * (1.0 / 30.0 -
                                                         inv2 * (5.0 / 66.0 -
                                                                 inv2 * (691.0 / 2730.0))))))));
  return result;
}

}  // namespace lfads
