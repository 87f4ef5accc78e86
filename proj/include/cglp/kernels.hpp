#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the matrix/autodiff layer and the vector
// index. Scalar reference implementations always exist; AVX2 variants are
// selected at runtime when the CPU supports them. Set CGLP_KERNEL=scalar in
// the environment to force the reference path.

namespace cglp::kernels {

enum class Backend { Scalar, Avx2 };

// Backend chosen at first use (cpuid + CGLP_KERNEL override).
Backend active_backend();
std::string backend_name();

// Reference kernels, always available. These define the semantics the SIMD
// variants are equivalence-tested against.
namespace scalar {
float dot(const float* a, const float* b, size_t n);
double dot(const double* a, const double* b, size_t n);
void axpy(float alpha, const float* x, float* y, size_t n);   // y += alpha*x
void axpy(double alpha, const double* x, double* y, size_t n);
void scale(float alpha, float* x, size_t n);
void scale(double alpha, double* x, size_t n);
void add(const float* a, const float* b, float* out, size_t n);
void add(const double* a, const double* b, double* out, size_t n);
void mul(const float* a, const float* b, float* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
float sum(const float* x, size_t n);
double sum(const double* x, size_t n);
float sum_sq(const float* x, size_t n);
double sum_sq(const double* x, size_t n);
float max(const float* x, size_t n);
double max(const double* x, size_t n);
// In-place x[i] = exp(x[i] - shift); returns the sum of the results.
float exp_shift_sum(float* x, size_t n, float shift);
double exp_shift_sum(double* x, size_t n, double shift);
}  // namespace scalar

// Dispatched entry points.
float dot(const float* a, const float* b, size_t n);
double dot(const double* a, const double* b, size_t n);
void axpy(float alpha, const float* x, float* y, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);
void scale(float alpha, float* x, size_t n);
void scale(double alpha, double* x, size_t n);
void add(const float* a, const float* b, float* out, size_t n);
void add(const double* a, const double* b, double* out, size_t n);
void mul(const float* a, const float* b, float* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
float sum(const float* x, size_t n);
double sum(const double* x, size_t n);
float sum_sq(const float* x, size_t n);
double sum_sq(const double* x, size_t n);
float max(const float* x, size_t n);
double max(const double* x, size_t n);
float exp_shift_sum(float* x, size_t n, float shift);
double exp_shift_sum(double* x, size_t n, double shift);

// Numerically stable in-place softmax over x[0..n); builds on max +
// exp_shift_sum + scale.
template <class T>
void softmax_inplace(T* x, size_t n) {
    if (n == 0) return;
    T m = max(x, n);
    T s = exp_shift_sum(x, n, m);
    scale(T(1) / s, x, n);
}

}  // namespace cglp::kernels
