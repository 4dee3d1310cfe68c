#pragma once
// Data-parallel reduction kernels with a scalar reference path and an AVX2
// path selected at runtime.
//
// Both paths accumulate into four interleaved lanes (element i feeds lane
// i % 4) and reduce them as (l0 + l1) + (l2 + l3). The exponential used by
// the logistic kernels is a Cody-Waite reduction followed by a degree-13
// Taylor polynomial evaluated with fused multiply-adds in both paths, so the
// scalar and vector results agree bit for bit.

#include <cstddef>
#include <span>
#include <string_view>

namespace confscore::kernels {

enum class Isa { scalar, avx2 };

/// Sums returned by the offset-logistic path kernel.
///
/// For eta_i = offset_i + eps * h_i and p_i = expit(eta_i):
///   score = sum h_i (y_i - p_i)
///   info  = sum h_i^2 p_i (1 - p_i)
///   loss  = sum softplus(eta_i) - y_i eta_i   (Bernoulli deviance / 2)
struct LogisticSums {
  double score = 0.0;
  double info = 0.0;
  double loss = 0.0;
};

/// Best instruction set supported by the running CPU.
Isa detected_isa();
/// Instruction set used by the dispatching entry points below.
Isa active_isa();
/// Overrides dispatch (tests and benchmarks). Requests for an unsupported
/// ISA fall back to scalar.
void force_isa(Isa isa);
std::string_view isa_name(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);

/// out_i = expit(offset_i + eps * h_i)
void expit_shift(std::span<const double> offset, std::span<const double> h,
                 double eps, std::span<double> out);

LogisticSums logistic_path(std::span<const double> offset,
                           std::span<const double> h,
                           std::span<const double> y, double eps);

/// Scalar exponential shared by both paths; |x| beyond 708 is clamped.
double exp_reference(double x);
/// Scalar log(1 + exp(x)) shared by both paths.
double softplus_reference(double x);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
void expit_shift(const double* offset, const double* h, double eps,
                 double* out, std::size_t n);
LogisticSums logistic_path(const double* offset, const double* h,
                           const double* y, double eps, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
void expit_shift(const double* offset, const double* h, double eps,
                 double* out, std::size_t n);
LogisticSums logistic_path(const double* offset, const double* h,
                           const double* y, double eps, std::size_t n);
}  // namespace avx2
#endif

}  // namespace confscore::kernels
