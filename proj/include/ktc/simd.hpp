#pragma once

#include <cstddef>
#include <string>

namespace ktc::simd {

/// Instruction-set backend for the dense double-precision kernels.
/// Selection happens once at startup: AVX2 when the CPU supports it,
/// NEON on aarch64 builds, scalar otherwise. The KTC_SIMD environment
/// variable ("scalar", "avx2", "neon", "auto") overrides the choice.
enum class Backend { Scalar, Avx2, Neon };

Backend active_backend();
const char* backend_name(Backend b);

/// Forces a backend, e.g. to compare variants in tests. Throws
/// std::runtime_error if the backend is not available on this machine.
void force_backend(Backend b);
bool backend_available(Backend b);

/// sum_i x[i] * y[i]
double dot(const double* x, const double* y, size_t n);

/// sum_i (x[i] - y[i])^2
double l2sq(const double* x, const double* y, size_t n);

/// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, size_t n);

/// w[i] += c * (x[i] - w[i])  -- the SOM/mean pull-toward update
void lerp_toward(double* w, const double* x, double c, size_t n);

/// xw = sum x[i]*w[i]; ww = sum w[i]*w[i], in one pass over w.
void dot_norm(const double* x, const double* w, size_t n, double& xw, double& ww);

} // namespace ktc::simd
