#include <algorithm>
#include <cmath>
#include <vector>

#include "lowrate/nn/kernels.hpp"

namespace lowrate::nn::kernels::parallel {

namespace {

constexpr std::size_t kRowBlock = 64;    // rows of b kept hot
constexpr std::size_t kColBlock = 256;   // output columns per task
constexpr std::size_t kDotBlock = 32;    // rows of b per dot-product tile
constexpr std::size_t kFeatureBlock = 64;

using Index = std::ptrdiff_t;

Index blocks(std::size_t n, std::size_t block) { return static_cast<Index>((n + block - 1) / block); }

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
  std::fill(c.begin(), c.begin() + static_cast<Index>(m * n), 0.0);
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
#pragma omp parallel for schedule(static)
  for (Index jb = 0; jb < blocks(n, kColBlock); ++jb) {
    const std::size_t j0 = static_cast<std::size_t>(jb) * kColBlock;
    const std::size_t j1 = std::min(n, j0 + kColBlock);
    for (std::size_t p0 = 0; p0 < k; p0 += kRowBlock) {
      const std::size_t p1 = std::min(k, p0 + kRowBlock);
      for (std::size_t i = 0; i < m; ++i) {
        double* crow = cp + i * n;
        const double* arow = ap + i * k;
        for (std::size_t p = p0; p < p1; ++p) {
          const double av = arow[p];
          const double* brow = bp + p * n;
#pragma omp simd
          for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
#pragma omp parallel for schedule(static)
  for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = cp + i * n;
    std::fill(crow, crow + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ap[p * m + i];
      if (av == 0.0) continue;
      const double* brow = bp + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
#pragma omp parallel for schedule(static)
  for (Index jb = 0; jb < blocks(n, kDotBlock); ++jb) {
    const std::size_t j0 = static_cast<std::size_t>(jb) * kDotBlock;
    const std::size_t j1 = std::min(n, j0 + kDotBlock);
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = ap + i * k;
      for (std::size_t j = j0; j < j1; ++j) {
        const double* brow = bp + j * k;
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        cp[i * n + j] = s;
      }
    }
  }
}

void add_row_bias(std::span<double> c, std::span<const double> bias, std::size_t m, std::size_t n) {
  double* cp = c.data();
  const double* bp = bias.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    double* row = cp + static_cast<std::size_t>(i) * n;
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) row[j] += bp[j];
  }
}

void column_sums(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n) {
  const double* ap = a.data();
  double* op = out.data();
#pragma omp parallel for schedule(static)
  for (Index jb = 0; jb < blocks(n, kFeatureBlock); ++jb) {
    const std::size_t j0 = static_cast<std::size_t>(jb) * kFeatureBlock;
    const std::size_t j1 = std::min(n, j0 + kFeatureBlock);
    std::fill(op + j0, op + j1, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = ap + i * n;
      for (std::size_t j = j0; j < j1; ++j) op[j] += row[j];
    }
  }
}

void batchnorm_train(std::span<const double> x, std::span<const double> gamma, std::span<const double> beta,
                     double eps, std::size_t m, std::size_t n, std::span<double> y, std::span<double> xhat,
                     std::span<double> mean, std::span<double> var, std::span<double> inv_std) {
  const double inv_m = 1.0 / static_cast<double>(m);
#pragma omp parallel for schedule(static)
  for (Index jb = 0; jb < blocks(n, kFeatureBlock); ++jb) {
    const std::size_t j0 = static_cast<std::size_t>(jb) * kFeatureBlock;
    const std::size_t j1 = std::min(n, j0 + kFeatureBlock);
    for (std::size_t j = j0; j < j1; ++j) mean[j] = 0.0, var[j] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = j0; j < j1; ++j) mean[j] += x[i * n + j];
    }
    for (std::size_t j = j0; j < j1; ++j) mean[j] *= inv_m;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = j0; j < j1; ++j) {
        double d = x[i * n + j] - mean[j];
        var[j] += d * d;
      }
    }
    for (std::size_t j = j0; j < j1; ++j) {
      var[j] *= inv_m;
      inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = j0; j < j1; ++j) {
        double h = (x[i * n + j] - mean[j]) * inv_std[j];
        xhat[i * n + j] = h;
        y[i * n + j] = gamma[j] * h + beta[j];
      }
    }
  }
}

void batchnorm_infer(std::span<const double> x, std::span<const double> gamma, std::span<const double> beta,
                     std::span<const double> running_mean, std::span<const double> running_var, double eps,
                     std::size_t m, std::size_t n, std::span<double> y) {
  std::vector<double> inv_std(n);
  for (std::size_t j = 0; j < n; ++j) inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
#pragma omp parallel for schedule(static)
  for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < n; ++j) {
      y[i * n + j] = gamma[j] * (x[i * n + j] - running_mean[j]) * inv_std[j] + beta[j];
    }
  }
}

void batchnorm_backward(std::span<const double> dy, std::span<const double> xhat, std::span<const double> gamma,
                        std::span<const double> inv_std, std::size_t m, std::size_t n, std::span<double> dx,
                        std::span<double> dgamma, std::span<double> dbeta) {
  const double inv_m = 1.0 / static_cast<double>(m);
#pragma omp parallel for schedule(static)
  for (Index jb = 0; jb < blocks(n, kFeatureBlock); ++jb) {
    const std::size_t j0 = static_cast<std::size_t>(jb) * kFeatureBlock;
    const std::size_t j1 = std::min(n, j0 + kFeatureBlock);
    for (std::size_t j = j0; j < j1; ++j) dbeta[j] = 0.0, dgamma[j] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = j0; j < j1; ++j) {
        dbeta[j] += dy[i * n + j];
        dgamma[j] += dy[i * n + j] * xhat[i * n + j];
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = j0; j < j1; ++j) {
        dx[i * n + j] = gamma[j] * inv_std[j] *
                        (dy[i * n + j] - inv_m * dbeta[j] - xhat[i * n + j] * inv_m * dgamma[j]);
      }
    }
  }
}

void tanh_forward(std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<Index>(x.size());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(std::span<const double> dy, std::span<const double> y, std::span<double> dx) {
  const auto n = static_cast<Index>(dy.size());
#pragma omp parallel for simd schedule(static)
  for (Index i = 0; i < n; ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
}

}  // namespace lowrate::nn::kernels::parallel
