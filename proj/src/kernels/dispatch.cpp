#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string_view>

#include "confscore/kernels.hpp"

namespace confscore::kernels {
namespace {

Isa probe() {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return Isa::avx2;
#endif
  return Isa::scalar;
}

Isa initial_isa() {
  const Isa best = probe();
  // CONFSCORE_ISA=scalar pins the reference path for a whole process
  if (const char* env = std::getenv("CONFSCORE_ISA")) {
    if (std::string_view(env) == "scalar") return Isa::scalar;
  }
  return best;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && detected_isa() != Isa::avx2) isa = Isa::scalar;
  active().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::avx2) return avx2::dot(a.data(), b.data(), a.size());
#endif
  return scalar::dot(a.data(), b.data(), a.size());
}

double sum(std::span<const double> a) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::avx2) return avx2::sum(a.data(), a.size());
#endif
  return scalar::sum(a.data(), a.size());
}

void expit_shift(std::span<const double> offset, std::span<const double> h,
                 double eps, std::span<double> out) {
  assert(offset.size() == h.size() && out.size() == h.size());
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::avx2)
    return avx2::expit_shift(offset.data(), h.data(), eps, out.data(),
                             out.size());
#endif
  scalar::expit_shift(offset.data(), h.data(), eps, out.data(), out.size());
}

LogisticSums logistic_path(std::span<const double> offset,
                           std::span<const double> h,
                           std::span<const double> y, double eps) {
  assert(offset.size() == h.size() && y.size() == h.size());
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::avx2)
    return avx2::logistic_path(offset.data(), h.data(), y.data(), eps,
                               h.size());
#endif
  return scalar::logistic_path(offset.data(), h.data(), y.data(), eps,
                               h.size());
}

}  // namespace confscore::kernels
