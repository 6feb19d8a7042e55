#pragma once

// Declarations of the per-backend kernel entry points, used only by the
// dispatcher in kernels.cpp and by lfads_bench / backend-equality tests.

#include <cstddef>

#include "lfads/kernels.hpp"

namespace lfads::kernels {

#define LFADS_DECLARE_BACKEND(prefix)                                                          \
  void prefix##_unary_apply(Unary, const double*, double*, size_t);                           \
  void prefix##_unary_grad_acc(Unary, const double*, const double*, const double*, double*,   \
                               size_t);                                                       \
  void prefix##_binary_apply(Binary, const double*, const double*, double*, size_t);          \
  void prefix##_scalar_apply(ScalarOp, const double*, double, double*, size_t);               \
  void prefix##_clamp_apply(const double*, double, double, double*, size_t);                  \
  void prefix##_clamp_grad_acc(const double*, double, double, const double*, double*, size_t);\
  void prefix##_pow_grad_acc(const double*, double, const double*, double*, size_t);          \
  void prefix##_axpy_acc(double, const double*, double*, size_t);                             \
  void prefix##_mul_acc(const double*, const double*, double*, size_t);                       \
  void prefix##_div_acc(const double*, const double*, double*, size_t);                       \
  void prefix##_div_grad_den_acc(const double*, const double*, const double*, double*,        \
                                 size_t);                                                     \
  void prefix##_rdiv_grad_acc(const double*, const double*, double, double*, size_t);         \
  void prefix##_matmul_nn(const double*, const double*, double*, size_t, size_t, size_t);     \
  void prefix##_matmul_nt_acc(const double*, const double*, double*, size_t, size_t, size_t); \
  void prefix##_matmul_tn_acc(const double*, const double*, double*, size_t, size_t, size_t); \
  double prefix##_reduce_all_sum(const double*, size_t);                                      \
  double prefix##_reduce_dot(const double*, const double*, size_t);                           \
  void prefix##_reduce_axis_sum(const double*, double*, size_t, size_t, size_t);              \
  void prefix##_col_sum_acc(const double*, double*, size_t, size_t);

LFADS_DECLARE_BACKEND(serial)
LFADS_DECLARE_BACKEND(omp)

#undef LFADS_DECLARE_BACKEND

}  // namespace lfads::kernels
