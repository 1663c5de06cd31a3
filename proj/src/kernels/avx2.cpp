// Compiled with -mavx2 -mfma. Nothing in here may run before the dispatcher
// has confirmed CPU support.

#include <immintrin.h>

#include "resinv/kernels.hpp"

namespace resinv::kernels {
namespace {

// 4x8 register tile: rows i..i+3, columns j..j+7 of C.
inline void tile_4x8(std::size_t k, const double* a, std::size_t lda, const double* b,
                     std::size_t ldb, double* c, std::size_t ldc) {
  __m256d c00 = _mm256_loadu_pd(c + 0 * ldc), c01 = _mm256_loadu_pd(c + 0 * ldc + 4);
  __m256d c10 = _mm256_loadu_pd(c + 1 * ldc), c11 = _mm256_loadu_pd(c + 1 * ldc + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * ldc), c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * ldc), c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    __m256d av = _mm256_broadcast_sd(a + 0 * lda + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + 1 * lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c + 0 * ldc, c00), _mm256_storeu_pd(c + 0 * ldc + 4, c01);
  _mm256_storeu_pd(c + 1 * ldc, c10), _mm256_storeu_pd(c + 1 * ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20), _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30), _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

// One row of C, columns [j0, n). Vector body of 4, scalar FMA tail.
inline void row_tail(std::size_t j0, std::size_t n, std::size_t k, const double* arow,
                     const double* b, std::size_t ldb, double* crow) {
  std::size_t j = j0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_loadu_pd(crow + j);
    for (std::size_t p = 0; p < k; ++p)
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + p), _mm256_loadu_pd(b + p * ldb + j), acc);
    _mm256_storeu_pd(crow + j, acc);
  }
  for (; j < n; ++j) {
    double acc = crow[j];
    for (std::size_t p = 0; p < k; ++p) acc = __builtin_fma(arow[p], b[p * ldb + j], acc);
    crow[j] = acc;
  }
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  // Column panels keep the B panel hot in L1/L2 while sweeping rows.
  constexpr std::size_t kPanel = 256;
  for (std::size_t j0 = 0; j0 < n; j0 += kPanel) {
    const std::size_t jn = j0 + kPanel < n ? j0 + kPanel : n;
    const std::size_t jv = j0 + ((jn - j0) / 8) * 8;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      for (std::size_t j = j0; j < jv; j += 8) tile_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
      if (jv < jn)
        for (std::size_t r = 0; r < 4; ++r) row_tail(jv, jn, k, a + (i + r) * lda, b, ldb, c + (i + r) * ldc);
    }
    for (; i < m; ++i) row_tail(j0, jn, k, a + i * lda, b, ldb, c + i * ldc);
  }
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = __builtin_fma(alpha, x[i], y[i]);
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s = __builtin_fma(x[i], y[i], s);
  return s;
}

void lerp_avx2(std::size_t n, const double* a, const double* b, double w, double* out) {
  const __m256d wv = _mm256_set1_pd(w);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d av = _mm256_loadu_pd(a + i);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(wv, _mm256_sub_pd(_mm256_loadu_pd(b + i), av), av));
  }
  for (; i < n; ++i) out[i] = __builtin_fma(w, b[i] - a[i], a[i]);
}

constexpr Table kAvx2{Isa::avx2, gemm_avx2, axpy_avx2, dot_avx2, lerp_avx2};

}  // namespace

const Table* avx2_table_unchecked() { return &kAvx2; }

}  // namespace resinv::kernels
