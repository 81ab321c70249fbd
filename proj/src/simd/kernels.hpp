#pragma once

#include <cstddef>

// Per-ISA kernel variants. The scalar set is the reference implementation;
// vector sets must match it within summation-reordering tolerance and are
// equivalence-tested against it.
namespace ktc::simd::detail {

double dot_scalar(const double* x, const double* y, size_t n);
double l2sq_scalar(const double* x, const double* y, size_t n);
void axpy_scalar(double a, const double* x, double* y, size_t n);
void lerp_toward_scalar(double* w, const double* x, double c, size_t n);
void dot_norm_scalar(const double* x, const double* w, size_t n, double& xw, double& ww);

#if defined(KTC_HAVE_AVX2)
double dot_avx2(const double* x, const double* y, size_t n);
double l2sq_avx2(const double* x, const double* y, size_t n);
void axpy_avx2(double a, const double* x, double* y, size_t n);
void lerp_toward_avx2(double* w, const double* x, double c, size_t n);
void dot_norm_avx2(const double* x, const double* w, size_t n, double& xw, double& ww);
#endif

#if defined(KTC_HAVE_NEON)
double dot_neon(const double* x, const double* y, size_t n);
double l2sq_neon(const double* x, const double* y, size_t n);
void axpy_neon(double a, const double* x, double* y, size_t n);
void lerp_toward_neon(double* w, const double* x, double c, size_t n);
void dot_norm_neon(const double* x, const double* w, size_t n, double& xw, double& ww);
#endif

} // namespace ktc::simd::detail
