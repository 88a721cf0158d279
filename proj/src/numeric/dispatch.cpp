#include <cstdlib>
#include <string_view>

#include "tape/kernels.hpp"

namespace tape::kernels {

#if defined(TAPE_HAVE_AVX2)
namespace avx2 {
const KernelTable& table() noexcept;
}
#endif

const KernelTable* avx2_table() noexcept {
#if defined(TAPE_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable* chosen = [] {
    const char* env = std::getenv("TAPE_KERNELS");
    if (env != nullptr && std::string_view(env) == "scalar") return &scalar_table();
    if (const KernelTable* t = avx2_table()) return t;
    return &scalar_table();
  }();
  return *chosen;
}

}  // namespace tape::kernels
