#pragma once

// Numeric kernels behind the network layers. Two implementations share one
// signature set: `reference` is the plain serial version kept as the test
// oracle, `parallel` is cache-blocked and OpenMP-parallel and is what the
// layers call. All matrices are row-major.
//
// Every parallel kernel partitions output elements only, so each output is
// reduced in a fixed order and results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace lowrate::nn::kernels {

#define LOWRATE_KERNEL_DECLS                                                                                  \
  /* c[m x n] = a[m x k] * b[k x n] */                                                                        \
  void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,      \
              std::size_t k, std::size_t n);                                                                  \
  /* c[m x n] = a^T * b with a[k x m], b[k x n] */                                                            \
  void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,   \
                 std::size_t k, std::size_t n);                                                               \
  /* c[m x n] = a * b^T with a[m x k], b[n x k] */                                                            \
  void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,   \
                 std::size_t k, std::size_t n);                                                               \
  /* c[i, :] += bias for every row */                                                                         \
  void add_row_bias(std::span<double> c, std::span<const double> bias, std::size_t m, std::size_t n);         \
  /* out[j] = sum_i a[i, j] */                                                                                \
  void column_sums(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n);           \
  /* Train-mode batch normalization over rows; writes y, xhat and per-column mean/var/inv_std. */             \
  void batchnorm_train(std::span<const double> x, std::span<const double> gamma, std::span<const double> beta, \
                       double eps, std::size_t m, std::size_t n, std::span<double> y, std::span<double> xhat,  \
                       std::span<double> mean, std::span<double> var, std::span<double> inv_std);             \
  void batchnorm_infer(std::span<const double> x, std::span<const double> gamma, std::span<const double> beta, \
                       std::span<const double> running_mean, std::span<const double> running_var, double eps,  \
                       std::size_t m, std::size_t n, std::span<double> y);                                    \
  void batchnorm_backward(std::span<const double> dy, std::span<const double> xhat,                           \
                          std::span<const double> gamma, std::span<const double> inv_std, std::size_t m,      \
                          std::size_t n, std::span<double> dx, std::span<double> dgamma,                      \
                          std::span<double> dbeta);                                                           \
  void tanh_forward(std::span<const double> x, std::span<double> y);                                          \
  /* dx = dy * (1 - y^2) */                                                                                   \
  void tanh_backward(std::span<const double> dy, std::span<const double> y, std::span<double> dx);

namespace reference {
LOWRATE_KERNEL_DECLS
}  // namespace reference

namespace parallel {
LOWRATE_KERNEL_DECLS
}  // namespace parallel

#undef LOWRATE_KERNEL_DECLS

}  // namespace lowrate::nn::kernels
