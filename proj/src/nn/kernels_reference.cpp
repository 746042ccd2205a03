#include <cmath>

#include "lowrate/nn/kernels.hpp"

namespace lowrate::nn::kernels::reference {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = s;
    }
  }
}

void add_row_bias(std::span<double> c, std::span<const double> bias, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += bias[j];
  }
}

void column_sums(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a[i * n + j];
    out[j] = s;
  }
}

void batchnorm_train(std::span<const double> x, std::span<const double> gamma, std::span<const double> beta,
                     double eps, std::size_t m, std::size_t n, std::span<double> y, std::span<double> xhat,
                     std::span<double> mean, std::span<double> var, std::span<double> inv_std) {
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < n; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < m; ++i) mu += x[i * n + j];
    mu *= inv_m;
    double v = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double d = x[i * n + j] - mu;
      v += d * d;
    }
    v *= inv_m;
    double is = 1.0 / std::sqrt(v + eps);
    mean[j] = mu;
    var[j] = v;
    inv_std[j] = is;
    for (std::size_t i = 0; i < m; ++i) {
      double h = (x[i * n + j] - mu) * is;
      xhat[i * n + j] = h;
      y[i * n + j] = gamma[j] * h + beta[j];
    }
  }
}

void batchnorm_infer(std::span<const double> x, std::span<const double> gamma, std::span<const double> beta,
                     std::span<const double> running_mean, std::span<const double> running_var, double eps,
                     std::size_t m, std::size_t n, std::span<double> y) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double is = 1.0 / std::sqrt(running_var[j] + eps);
      y[i * n + j] = gamma[j] * (x[i * n + j] - running_mean[j]) * is + beta[j];
    }
  }
}

void batchnorm_backward(std::span<const double> dy, std::span<const double> xhat, std::span<const double> gamma,
                        std::span<const double> inv_std, std::size_t m, std::size_t n, std::span<double> dx,
                        std::span<double> dgamma, std::span<double> dbeta) {
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < n; ++j) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum_dy += dy[i * n + j];
      sum_dy_xhat += dy[i * n + j] * xhat[i * n + j];
    }
    dbeta[j] = sum_dy;
    dgamma[j] = sum_dy_xhat;
    double scale = gamma[j] * inv_std[j];
    for (std::size_t i = 0; i < m; ++i) {
      dx[i * n + j] = scale * (dy[i * n + j] - inv_m * sum_dy - xhat[i * n + j] * inv_m * sum_dy_xhat);
    }
  }
}

void tanh_forward(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(std::span<const double> dy, std::span<const double> y, std::span<double> dx) {
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
}

}  // namespace lowrate::nn::kernels::reference
