#pragma once

#include <cstddef>

namespace lfads::kernels {

// Two interchangeable backends. The OpenMP backend parallelizes over
// independent output rows/chunks; every output element accumulates its terms
// in the same order in both backends, so results are bitwise identical for
// any thread count. Tests assert that equality; lfads_bench measures the
// throughput difference.
enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);
bool openmp_available();

enum class Unary { neg, exp, log, tanh, sigmoid, softplus, lgamma, digamma };
enum class Binary { add, sub, mul, div };
// Tensor-scalar forms. sub: x-s, rsub: s-x, div: x/s, rdiv: s/x, pow: x^s.
enum class ScalarOp { add, sub, rsub, mul, div, rdiv, pow };

void unary_apply(Unary op, const double* x, double* y, size_t n);
// gx[i] += gy[i] * f'(x[i]) with y[i] = f(x[i]) available for ops whose
// derivative is cheapest through the output (exp, tanh, sigmoid).
void unary_grad_acc(Unary op, const double* x, const double* y, const double* gy,
                    double* gx, size_t n);

void binary_apply(Binary op, const double* a, const double* b, double* y, size_t n);
void scalar_apply(ScalarOp op, const double* x, double s, double* y, size_t n);

void clamp_apply(const double* x, double lo, double hi, double* y, size_t n);
// Pass-through gradient inside [lo, hi], zero outside.
void clamp_grad_acc(const double* x, double lo, double hi, const double* gy,
                    double* gx, size_t n);
void pow_grad_acc(const double* x, double p, const double* gy, double* gx, size_t n);

void axpy_acc(double a, const double* x, double* y, size_t n);         // y += a*x
void mul_acc(const double* a, const double* b, double* y, size_t n);   // y += a*b
void div_acc(const double* a, const double* b, double* y, size_t n);   // y += a/b
// gb[i] -= gy[i] * a[i] / b[i]^2   (gradient of a/b w.r.t. b)
void div_grad_den_acc(const double* gy, const double* a, const double* b,
                      double* gb, size_t n);
// gb[i] -= gy[i] * s / b[i]^2      (gradient of s/b w.r.t. b)
void rdiv_grad_acc(const double* gy, const double* b, double s, double* gb, size_t n);

// C[m,n] = A[m,k] * B[k,n]
void matmul_nn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
// C[m,r] += A[m,q] * B[r,q]^T
void matmul_nt_acc(const double* a, const double* b, double* c, size_t m, size_t q, size_t r);
// C[ma,nb] += A[p,ma]^T * B[p,nb]
void matmul_tn_acc(const double* a, const double* b, double* c, size_t p, size_t ma, size_t nb);

// Deterministic full reduction: fixed 1024-element chunks summed serially,
// chunk partials combined in ascending order.
double reduce_all_sum(const double* x, size_t n);
double reduce_dot(const double* a, const double* b, size_t n);

// y[o,i] = sum_k x[o,k,i] for x viewed as [outer, r, inner]; y is assigned.
void reduce_axis_sum(const double* x, double* y, size_t outer, size_t r, size_t inner);
// out[j] += sum_i g[i,j] for g viewed as [m, n].
void col_sum_acc(const double* g, double* out, size_t m, size_t n);

}  // namespace lfads::kernels
