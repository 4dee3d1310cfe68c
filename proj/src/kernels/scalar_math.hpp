#pragma once
// Element-wise math shared by the scalar and AVX2 kernel translation units.
// Everything here has internal linkage so each TU gets a copy compiled with
// its own target flags. The operation sequence mirrors the AVX2 code exactly
// (fma where the vector path uses fmadd, plain ops elsewhere).

#include <cmath>
#include <cstdint>
#include <cstring>

namespace confscore::kernels {
namespace {

constexpr double kExpClamp = 708.0;
constexpr double kLog2e = 1.4426950408889634074;
constexpr double kLn2Hi = 6.93145751953125e-1;
constexpr double kLn2Lo = 1.42860682030941723212e-6;
constexpr double kRoundMagic = 6755399441055744.0;  // 0x1.8p52

// Taylor coefficients 1/k!, k = 13 .. 0
constexpr double kExpCoeffs[14] = {
    1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0,
    1.0 / 3628800.0,    1.0 / 362880.0,    1.0 / 40320.0,
    1.0 / 5040.0,       1.0 / 720.0,       1.0 / 120.0,
    1.0 / 24.0,         1.0 / 6.0,         0.5,
    1.0,                1.0};

// 1/(2k+1), k = 17 .. 0, for log1p(t) = 2 atanh(t / (2 + t))
constexpr double kAtanhCoeffs[18] = {
    1.0 / 35.0, 1.0 / 33.0, 1.0 / 31.0, 1.0 / 29.0, 1.0 / 27.0, 1.0 / 25.0,
    1.0 / 23.0, 1.0 / 21.0, 1.0 / 19.0, 1.0 / 17.0, 1.0 / 15.0, 1.0 / 13.0,
    1.0 / 11.0, 1.0 / 9.0,  1.0 / 7.0,  1.0 / 5.0,  1.0 / 3.0,  1.0};

inline double exp_scalar(double x) {
  x = std::fmin(std::fmax(x, -kExpClamp), kExpClamp);
  const double n = std::nearbyint(x * kLog2e);
  double r = std::fma(-n, kLn2Hi, x);
  r = std::fma(-n, kLn2Lo, r);
  double poly = kExpCoeffs[0];
  for (int k = 1; k < 14; ++k) poly = std::fma(poly, r, kExpCoeffs[k]);
  // 2^n via the exponent field; mirrors the vector bit trick
  const double shifted = n + kRoundMagic;
  std::int64_t nbits, magic_bits;
  std::memcpy(&nbits, &shifted, sizeof nbits);
  std::memcpy(&magic_bits, &kRoundMagic, sizeof magic_bits);
  const std::int64_t ebits = (nbits - magic_bits + 1023) << 52;
  double scale;
  std::memcpy(&scale, &ebits, sizeof scale);
  return poly * scale;
}

// log(1 + t) for t in [0, 1]
inline double log1p_unit(double t) {
  const double s = t / (2.0 + t);
  const double s2 = s * s;
  double poly = kAtanhCoeffs[0];
  for (int k = 1; k < 18; ++k) poly = std::fma(poly, s2, kAtanhCoeffs[k]);
  return (s + s) * poly;
}

struct ExpitParts {
  double p;
  double t;  // exp(-|eta|)
};

inline ExpitParts expit_parts(double eta) {
  const double t = exp_scalar(-std::fabs(eta));
  const double num = eta < 0.0 ? t : 1.0;
  return {num / (1.0 + t), t};
}

inline double softplus_scalar(double eta) {
  const double t = exp_scalar(-std::fabs(eta));
  return std::fmax(eta, 0.0) + log1p_unit(t);
}

inline double reduce_lanes(const double lanes[4]) {
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

// Per-element update of the logistic path sums into lane accumulators.
inline void logistic_path_element(double off, double h, double y, double eps,
                                  double& score, double& info, double& loss) {
  const double eta = std::fma(eps, h, off);
  const ExpitParts e = expit_parts(eta);
  const double resid = y - e.p;
  score = score + h * resid;
  info = info + (h * h) * (e.p * (1.0 - e.p));
  loss = loss + ((std::fmax(eta, 0.0) + log1p_unit(e.t)) - y * eta);
}

}  // namespace
}  // namespace confscore::kernels
