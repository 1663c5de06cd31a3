#pragma once

// Inner-loop arithmetic used by the tensor ops. Every routine has a portable
// scalar reference and, where the CPU supports it, a vectorised variant. The
// variant is chosen once at startup (or explicitly via select()); results of
// the two paths agree to rounding, and each path is deterministic on its own.

#include <cstddef>
#include <string_view>

namespace resinv::kernels {

enum class Isa { scalar, avx2 };

struct Table {
  Isa isa;
  /// C[M,N] += A[M,K] * B[K,N], all row-major with leading dimensions.
  /// Each C element accumulates its K products in ascending k order.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc);
  /// y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  /// sum_i x[i] * y[i], ascending i
  double (*dot)(std::size_t n, const double* x, const double* y);
  /// out = a + w * (b - a)
  void (*lerp)(std::size_t n, const double* a, const double* b, double w, double* out);
};

const Table& scalar_table();
/// nullptr when this build or this CPU has no AVX2+FMA.
const Table* avx2_table();

/// Currently selected table. Defaults to the best supported ISA; the
/// RESINV_KERNELS environment variable ("scalar" or "avx2") overrides.
const Table& active();

/// Force a specific ISA; returns false (and leaves the selection unchanged)
/// when it is not available.
bool select(Isa isa);

std::string_view name(Isa isa);

}  // namespace resinv::kernels
