// Serial reference backend. Plain loops, no OpenMP dependency; the parallel
// backend in kernels_omp.cpp must match these results bitwise.

#include <vector>

#include "kernels_scalar.hpp"
#include "lfads/kernels.hpp"

namespace lfads::kernels {

using detail::binary_f;
using detail::kReduceChunk;
using detail::scalar_f;
using detail::unary_df;
using detail::unary_f;

void serial_unary_apply(Unary op, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = unary_f(op, x[i]);
}

void serial_unary_grad_acc(Unary op, const double* x, const double* y,
                           const double* gy, double* gx, size_t n) {
  for (size_t i = 0; i < n; ++i) gx[i] += gy[i] * unary_df(op, x[i], y[i]);
}

void serial_binary_apply(Binary op, const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = binary_f(op, a[i], b[i]);
}

void serial_scalar_apply(ScalarOp op, const double* x, double s, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = scalar_f(op, x[i], s);
}

void serial_clamp_apply(const double* x, double lo, double hi, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] < lo ? lo : (x[i] > hi ? hi : x[i]);
}

void serial_clamp_grad_acc(const double* x, double lo, double hi, const double* gy,
                           double* gx, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (x[i] >= lo && x[i] <= hi) gx[i] += gy[i];
}

void serial_pow_grad_acc(const double* x, double p, const double* gy, double* gx, size_t n) {
  for (size_t i = 0; i < n; ++i) gx[i] += gy[i] * p * std::pow(x[i], p - 1.0);
}

void serial_axpy_acc(double a, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void serial_mul_acc(const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

void serial_div_acc(const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a[i] / b[i];
}

void serial_div_grad_den_acc(const double* gy, const double* a, const double* b,
                             double* gb, size_t n) {
  for (size_t i = 0; i < n; ++i) gb[i] -= gy[i] * a[i] / (b[i] * b[i]);
}

void serial_rdiv_grad_acc(const double* gy, const double* b, double s, double* gb, size_t n) {
  for (size_t i = 0; i < n; ++i) gb[i] -= gy[i] * s / (b[i] * b[i]);
}

void serial_matmul_nn(const double* a, const double* b, double* c,
                      size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + i * k;
    for (size_t kk = 0; kk < k; ++kk) {
      const double aik = ai[kk];
      const double* bk = b + kk * n;
      for (size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

void serial_matmul_nt_acc(const double* a, const double* b, double* c,
                          size_t m, size_t q, size_t r) {
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * q;
    double* ci = c + i * r;
    for (size_t j = 0; j < r; ++j) {
      const double* bj = b + j * q;
      double s = 0.0;
      for (size_t t = 0; t < q; ++t) s += ai[t] * bj[t];
      ci[j] += s;
    }
  }
}

void serial_matmul_tn_acc(const double* a, const double* b, double* c,
                          size_t p, size_t ma, size_t nb) {
  for (size_t i = 0; i < ma; ++i) {
    double* ci = c + i * nb;
    for (size_t t = 0; t < p; ++t) {
      const double ati = a[t * ma + i];
      const double* bt = b + t * nb;
      for (size_t j = 0; j < nb; ++j) ci[j] += ati * bt[j];
    }
  }
}

double serial_reduce_all_sum(const double* x, size_t n) {
  const size_t n_chunks = (n + kReduceChunk - 1) / kReduceChunk;
  if (n_chunks == 0) return 0.0;
  std::vector<double> partial(n_chunks);
  for (size_t c = 0; c < n_chunks; ++c) {
    const size_t lo = c * kReduceChunk;
    const size_t hi = lo + kReduceChunk < n ? lo + kReduceChunk : n;
    double s = 0.0;
    for (size_t i = lo; i < hi; ++i) s += x[i];
    partial[c] = s;
  }
  double total = 0.0;
  for (size_t c = 0; c < n_chunks; ++c) total += partial[c];
  return total;
}

double serial_reduce_dot(const double* a, const double* b, size_t n) {
  const size_t n_chunks = (n + kReduceChunk - 1) / kReduceChunk;
  if (n_chunks == 0) return 0.0;
  std::vector<double> partial(n_chunks);
  for (size_t c = 0; c < n_chunks; ++c) {
    const size_t lo = c * kReduceChunk;
    const size_t hi = lo + kReduceChunk < n ? lo + kReduceChunk : n;
    double s = 0.0;
    for (size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    partial[c] = s;
  }
  double total = 0.0;
  for (size_t c = 0; c < n_chunks; ++c) total += partial[c];
  return total;
}

void serial_reduce_axis_sum(const double* x, double* y, size_t outer, size_t r, size_t inner) {
  for (size_t o = 0; o < outer; ++o) {
    double* yo = y + o * inner;
    for (size_t i = 0; i < inner; ++i) yo[i] = 0.0;
    for (size_t kk = 0; kk < r; ++kk) {
      const double* xk = x + (o * r + kk) * inner;
      for (size_t i = 0; i < inner; ++i) yo[i] += xk[i];
    }
  }
}

void serial_col_sum_acc(const double* g, double* out, size_t m, size_t n) {
  for (size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (size_t i = 0; i < m; ++i) s += g[i * n + j];
    out[j] += s;
  }
}

}  // namespace lfads::kernels
