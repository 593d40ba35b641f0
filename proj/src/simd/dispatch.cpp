#include <atomic>
#include <cstdlib>
#include <string>

#include "tpvd/error.hpp"
#include "tpvd/simd/kernels.hpp"

namespace tpvd::simd {
namespace {

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(TPVD_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Isa::neon:
#if defined(TPVD_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_storage(Isa isa) {
  static const KernelTable scalar = detail::scalar_table();
#if defined(TPVD_HAVE_AVX2)
  static const KernelTable avx2 = detail::avx2_table();
  if (isa == Isa::avx2) return avx2;
#endif
#if defined(TPVD_HAVE_NEON)
  static const KernelTable neon = detail::neon_table();
  if (isa == Isa::neon) return neon;
#endif
  return scalar;
}

Isa initial_isa() {
  if (const char* env = std::getenv("TPVD_SIMD")) {
    const std::string want(env);
    for (Isa isa : available_isas()) {
      if (isa_name(isa) == want) return isa;
    }
  }
  return available_isas().back();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{&table_storage(initial_isa())};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::neon, Isa::avx2}) {
    if (cpu_has(isa)) out.push_back(isa);
  }
  return out;
}

const KernelTable& kernels_for(Isa isa) {
  if (!cpu_has(isa)) {
    throw DomainError("SIMD variant '" + std::string(isa_name(isa)) + "' is not available");
  }
  return table_storage(isa);
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

Isa set_active_isa(Isa isa) {
  const KernelTable& next = kernels_for(isa);
  return active().exchange(&next, std::memory_order_acq_rel)->isa;
}

}  // namespace tpvd::simd
