#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "cycinpaint/simd/kernels.hpp"

namespace cycinpaint::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa detect_isa() {
  if (const char* env = std::getenv("CYCINPAINT_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
  }
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::runtime_error("SIMD variant not supported on this CPU: " +
                             std::string(isa_name(isa)));
  }
  return isa == Isa::avx2 ? avx2::table : scalar::table;
}

namespace {
std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{&kernels_for(detect_isa())};
  return table;
}
}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

void set_active_isa(Isa isa) { active().store(&kernels_for(isa), std::memory_order_release); }

}  // namespace cycinpaint::simd
