// Runtime backend selection for the inner-loop kernels.

#include <cstdlib>
#include <cstring>

#include "bxfuse/errors.hpp"
#include "bxfuse/kernels.hpp"

namespace bxfuse::kernels {

const KernelTable& scalar_table();
#if defined(BXFUSE_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(BXFUSE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() {
  if (const char* env = std::getenv("BXFUSE_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::avx2;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

Backend& current() {
  static Backend b = detect();
  return b;
}

}  // namespace

Backend active_backend() { return current(); }

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2: return cpu_has_avx2();
  }
  return false;
}

void set_backend(Backend b) {
  if (!backend_supported(b))
    throw Error(std::string("kernel backend not supported on this machine: ") +
                backend_name(b));
  current() = b;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "?";
}

const KernelTable& table(Backend b) {
#if defined(BXFUSE_HAVE_AVX2)
  if (b == Backend::avx2) return avx2_table();
#endif
  (void)b;
  return scalar_table();
}

const KernelTable& table() { return table(current()); }

MomentSink& MomentSink::operator+=(const MomentSink& o) {
  for (int l = 0; l < 8; ++l) {
    n[l] += o.n[l];
    sf[l] += o.sf[l];
    sm[l] += o.sm[l];
    sff[l] += o.sff[l];
    smm[l] += o.smm[l];
    sfm[l] += o.sfm[l];
    sdd[l] += o.sdd[l];
  }
  return *this;
}

namespace {
double tree8(const double* v) {
  return ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]));
}
}  // namespace

Moments finalize(const MomentSink& s) {
  Moments m;
  m.n = tree8(s.n);
  m.sf = tree8(s.sf);
  m.sm = tree8(s.sm);
  m.sff = tree8(s.sff);
  m.smm = tree8(s.smm);
  m.sfm = tree8(s.sfm);
  m.sdd = tree8(s.sdd);
  return m;
}

}  // namespace bxfuse::kernels
