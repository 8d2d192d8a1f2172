#include <atomic>
#include <cstdlib>
#include <string>

#include "plabel/error.hpp"
#include "plabel/kernels.hpp"

namespace plabel::kernels {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

void BoxBuffer::reserve(std::size_t n) {
  x1_.reserve(n);
  y1_.reserve(n);
  x2_.reserve(n);
  y2_.reserve(n);
}

void BoxBuffer::clear() {
  x1_.clear();
  y1_.clear();
  x2_.clear();
  y2_.clear();
}

void BoxBuffer::push_back(const BBox& b) {
  push_back_edges(b.x, b.y, b.right(), b.bottom());
}

void BoxBuffer::push_back_edges(double x1, double y1, double x2, double y2) {
  x1_.push_back(x1);
  y1_.push_back(y1);
  x2_.push_back(x2);
  y2_.push_back(y2);
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return detail::avx2_table() != nullptr && __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon: return detail::neon_table() != nullptr;
  }
  return false;
}

namespace {

Isa probe() {
  if (const char* env = std::getenv("PLABEL_ISA")) {
    const std::string want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
      if (want == to_string(isa) && isa_supported(isa)) return isa;
    }
  }
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  if (isa_supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

}  // namespace

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    fail(ErrorKind::Config,
         "kernel ISA '" + std::string(to_string(isa)) + "' is not available");
  }
  active().store(isa, std::memory_order_relaxed);
}

const KernelTable& table(Isa isa) {
  switch (isa) {
    case Isa::Avx2:
      if (const KernelTable* t = detail::avx2_table()) return *t;
      break;
    case Isa::Neon:
      if (const KernelTable* t = detail::neon_table()) return *t;
      break;
    case Isa::Scalar: break;
  }
  return detail::scalar_table();
}

}  // namespace plabel::kernels
