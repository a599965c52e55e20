#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "lyap/error.hpp"
#include "lyap/kernels.hpp"

namespace lyap::kernels {

namespace {

const KernelTable kScalar{Backend::Scalar,          detail::dot_scalar,   detail::axpy_scalar,
                          detail::scale_scalar,     detail::gemv_scalar,  detail::gemv_t_scalar,
                          detail::ger_scalar};

#if defined(LYAP_HAVE_AVX2_KERNELS)
const KernelTable kAvx2{Backend::Avx2,        detail::dot_avx2,  detail::axpy_avx2,
                        detail::scale_avx2,   detail::gemv_avx2, detail::gemv_t_avx2,
                        detail::ger_avx2};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#else
bool cpu_has_avx2() { return false; }
#endif

const KernelTable* initial_table() {
  const char* env = std::getenv("LYAP_SIMD");
  if (env != nullptr && std::string(env) == "scalar") return &kScalar;
  if (const KernelTable* t = avx2_table()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(LYAP_HAVE_AVX2_KERNELS)
  static const bool ok = cpu_has_avx2();
  return ok ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool backend_available(Backend b) { return b == Backend::Scalar || avx2_table() != nullptr; }

void set_backend(Backend b) {
  if (b == Backend::Scalar) {
    current().store(&kScalar);
    return;
  }
  const KernelTable* t = avx2_table();
  require(t != nullptr, "AVX2 kernels requested but the CPU does not support AVX2+FMA");
  current().store(t);
}

std::string_view backend_name(Backend b) { return b == Backend::Scalar ? "scalar" : "avx2"; }

}  // namespace lyap::kernels
