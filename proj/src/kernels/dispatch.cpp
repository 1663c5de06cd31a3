#include <atomic>
#include <cstdlib>
#include <string>

#include "resinv/kernels.hpp"

namespace resinv::kernels {

#ifdef RESINV_HAVE_AVX2_TU
const Table* avx2_table_unchecked();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(RESINV_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* initial() {
  const Table* best = avx2_table() ? avx2_table() : &scalar_table();
  if (const char* env = std::getenv("RESINV_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && avx2_table()) return avx2_table();
  }
  return best;
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> table{initial()};
  return table;
}

}  // namespace

const Table* avx2_table() {
#ifdef RESINV_HAVE_AVX2_TU
  static const bool ok = cpu_has_avx2();
  return ok ? avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const Table& active() { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) {
  const Table* t = isa == Isa::scalar ? &scalar_table() : avx2_table();
  if (!t) return false;
  current().store(t, std::memory_order_release);
  return true;
}

std::string_view name(Isa isa) { return isa == Isa::scalar ? "scalar" : "avx2"; }

}  // namespace resinv::kernels
