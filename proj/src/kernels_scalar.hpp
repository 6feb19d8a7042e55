#pragma once

// Scalar math shared by the serial and OpenMP kernel backends. Keeping the
// per-element formulas in one place guarantees the backends can only differ
// in loop scheduling, never in arithmetic.

#include <cmath>

#include "lfads/kernels.hpp"
#include "lfads/special_functions.hpp"

namespace lfads::kernels::detail {

inline double sigmoid_s(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus_s(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double unary_f(Unary op, double x) {
  switch (op) {
    case Unary::neg: return -x;
    case Unary::exp: return std::exp(x);
    case Unary::log: return std::log(x);
    case Unary::tanh: return std::tanh(x);
    case Unary::sigmoid: return sigmoid_s(x);
    case Unary::softplus: return softplus_s(x);
    case Unary::lgamma: return lgamma_pos(x);
    case Unary::digamma: return digamma_pos(x);
  }
  return 0.0;
}

// Derivative of unary_f at x, given y = unary_f(x).
inline double unary_df(Unary op, double x, double y) {
  switch (op) {
    case Unary::neg: return -1.0;
    case Unary::exp: return y;
    case Unary::log: return 1.0 / x;
    case Unary::tanh: return 1.0 - y * y;
    case Unary::sigmoid: return y * (1.0 - y);
    case Unary::softplus: return sigmoid_s(x);
    case Unary::lgamma: return digamma_pos(x);
    case Unary::digamma: return trigamma_pos(x);
  }
  return 0.0;
}

inline double binary_f(Binary op, double a, double b) {
  switch (op) {
    case Binary::add: return a + b;
    case Binary::sub: return a - b;
    case Binary::mul: return a * b;
    case Binary::div: return a / b;
  }
  return 0.0;
}

inline double scalar_f(ScalarOp op, double x, double s) {
  switch (op) {
    case ScalarOp::add: return x + s;
    case ScalarOp::sub: return x - s;
    case ScalarOp::rsub: return s - x;
    case ScalarOp::mul: return x * s;
    case ScalarOp::div: return x / s;
    case ScalarOp::rdiv: return s / x;
    case ScalarOp::pow: return std::pow(x, s);
  }
  return 0.0;
}

constexpr size_t kReduceChunk = 1024;

}  // namespace lfads::kernels::detail
