#include "petsa/kernels.hpp"

#include <cstdlib>

namespace petsa::kernels {

const Kernels* avx2_kernels();  // kernels_avx2.cpp; null when not built for x86

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* lookup(std::string_view name) {
  if (name == "scalar") return &scalar();
  if (name == "avx2" && cpu_has_avx2_fma()) return avx2_kernels();
  return nullptr;
}

const Kernels* pick_default() {
  if (const char* env = std::getenv("PETSA_KERNELS")) {
    if (const Kernels* k = lookup(env)) return k;
  }
  if (cpu_has_avx2_fma()) {
    if (const Kernels* k = avx2_kernels()) return k;
  }
  return &scalar();
}

const Kernels*& selected() {
  static const Kernels* k = pick_default();
  return k;
}

}  // namespace

const Kernels& active() { return *selected(); }

bool select(std::string_view name) {
  if (const Kernels* k = lookup(name)) {
    selected() = k;
    return true;
  }
  return false;
}

std::vector<std::string> available() {
  std::vector<std::string> out{"scalar"};
  if (cpu_has_avx2_fma() && avx2_kernels()) out.emplace_back("avx2");
  return out;
}

}  // namespace petsa::kernels
