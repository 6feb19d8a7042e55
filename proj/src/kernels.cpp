#include "lfads/kernels.hpp"

#include <atomic>

#include "kernels_backends.hpp"

namespace lfads::kernels {

namespace {
std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::openmp
#else
    Backend::serial
#endif
};
}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
#ifndef _OPENMP
  b = Backend::serial;
#endif
  g_backend.store(b, std::memory_order_relaxed);
}

bool openmp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

#define LFADS_DISPATCH(fn, ...)                       \
  if (backend() == Backend::openmp) {                 \
    omp_##fn(__VA_ARGS__);                            \
  } else {                                            \
    serial_##fn(__VA_ARGS__);                         \
  }

#define LFADS_DISPATCH_RET(fn, ...)                   \
  return backend() == Backend::openmp ? omp_##fn(__VA_ARGS__) : serial_##fn(__VA_ARGS__);

void unary_apply(Unary op, const double* x, double* y, size_t n) {
  LFADS_DISPATCH(unary_apply, op, x, y, n)
}
void unary_grad_acc(Unary op, const double* x, const double* y, const double* gy,
                    double* gx, size_t n) {
  LFADS_DISPATCH(unary_grad_acc, op, x, y, gy, gx, n)
}
void binary_apply(Binary op, const double* a, const double* b, double* y, size_t n) {
  LFADS_DISPATCH(binary_apply, op, a, b, y, n)
}
void scalar_apply(ScalarOp op, const double* x, double s, double* y, size_t n) {
  LFADS_DISPATCH(scalar_apply, op, x, s, y, n)
}
void clamp_apply(const double* x, double lo, double hi, double* y, size_t n) {
  LFADS_DISPATCH(clamp_apply, x, lo, hi, y, n)
}
void clamp_grad_acc(const double* x, double lo, double hi, const double* gy,
                    double* gx, size_t n) {
  LFADS_DISPATCH(clamp_grad_acc, x, lo, hi, gy, gx, n)
}
void pow_grad_acc(const double* x, double p, const double* gy, double* gx, size_t n) {
  LFADS_DISPATCH(pow_grad_acc, x, p, gy, gx, n)
}
void axpy_acc(double a, const double* x, double* y, size_t n) {
  LFADS_DISPATCH(axpy_acc, a, x, y, n)
}
void mul_acc(const double* a, const double* b, double* y, size_t n) {
  LFADS_DISPATCH(mul_acc, a, b, y, n)
}
void div_acc(const double* a, const double* b, double* y, size_t n) {
  LFADS_DISPATCH(div_acc, a, b, y, n)
}
void div_grad_den_acc(const double* gy, const double* a, const double* b,
                      double* gb, size_t n) {
  LFADS_DISPATCH(div_grad_den_acc, gy, a, b, gb, n)
}
void rdiv_grad_acc(const double* gy, const double* b, double s, double* gb, size_t n) {
  LFADS_DISPATCH(rdiv_grad_acc, gy, b, s, gb, n)
}
void matmul_nn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
  LFADS_DISPATCH(matmul_nn, a, b, c, m, k, n)
}
void matmul_nt_acc(const double* a, const double* b, double* c, size_t m, size_t q, size_t r) {
  LFADS_DISPATCH(matmul_nt_acc, a, b, c, m, q, r)
}
void matmul_tn_acc(const double* a, const double* b, double* c, size_t p, size_t ma, size_t nb) {
  LFADS_DISPATCH(matmul_tn_acc, a, b, c, p, ma, nb)
}
double reduce_all_sum(const double* x, size_t n) { LFADS_DISPATCH_RET(reduce_all_sum, x, n) }
double reduce_dot(const double* a, const double* b, size_t n) {
  LFADS_DISPATCH_RET(reduce_dot, a, b, n)
}
void reduce_axis_sum(const double* x, double* y, size_t outer, size_t r, size_t inner) {
  LFADS_DISPATCH(reduce_axis_sum, x, y, outer, r, inner)
}
void col_sum_acc(const double* g, double* out, size_t m, size_t n) {
  LFADS_DISPATCH(col_sum_acc, g, out, m, n)
}

#undef LFADS_DISPATCH
#undef LFADS_DISPATCH_RET

}  // namespace lfads::kernels
