#include "resinv/kernels.hpp"

namespace resinv::kernels {
namespace {

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * lda + p];
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void lerp_scalar(std::size_t n, const double* a, const double* b, double w, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + w * (b[i] - a[i]);
}

constexpr Table kScalar{Isa::scalar, gemm_scalar, axpy_scalar, dot_scalar, lerp_scalar};

}  // namespace

const Table& scalar_table() { return kScalar; }

}  // namespace resinv::kernels
