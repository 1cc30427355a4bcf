#pragma once

#include <cmath>
#include <cstdint>

// Shared exp/tanh/gelu math for the scalar and SIMD kernel backends. Both
// backends evaluate the same rational approximation (Cephes-style exp) so
// results agree to the last few ulp regardless of the selected backend.
namespace mogen::kern::detail {

inline constexpr double kExpP0 = 1.26177193074810590878e-4;
inline constexpr double kExpP1 = 3.02994407707441961300e-2;
inline constexpr double kExpP2 = 9.99999999999999999910e-1;
inline constexpr double kExpQ0 = 3.00198505138664455042e-6;
inline constexpr double kExpQ1 = 2.52448340349684104192e-3;
inline constexpr double kExpQ2 = 2.27265548208155028766e-1;
inline constexpr double kExpQ3 = 2.00000000000000000005e0;
inline constexpr double kLog2E = 1.4426950408889634073599;
inline constexpr double kExpC1 = 6.93145751953125e-1;
inline constexpr double kExpC2 = 1.42860682030941723212e-6;
inline constexpr double kExpHi = 709.0;
inline constexpr double kExpLo = -708.0;

inline constexpr double kGeluC = 0.797884560802865355879892119869;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

inline double exp_scalar(double x) {
    if (x != x) return x;
    if (x > kExpHi) return HUGE_VAL;
    if (x < kExpLo) return 0.0;
    const double pxf = std::floor(kLog2E * x + 0.5);
    const int n = static_cast<int>(pxf);
    x -= pxf * kExpC1;
    x -= pxf * kExpC2;
    const double xx = x * x;
    const double p = x * ((kExpP0 * xx + kExpP1) * xx + kExpP2);
    const double q = ((kExpQ0 * xx + kExpQ1) * xx + kExpQ2) * xx + kExpQ3;
    const double r = 1.0 + 2.0 * p / (q - p);
    // scale by 2^n through exponent bits; n is in [-1022, 1023] here
    uint64_t bits = static_cast<uint64_t>(n + 1023) << 52;
    double s;
    __builtin_memcpy(&s, &bits, sizeof s);
    return r * s;
}

inline double tanh_scalar(double x) {
    const double ax = std::fabs(x);
    const double e = exp_scalar(-2.0 * ax);
    const double t = (1.0 - e) / (1.0 + e);
    return x < 0.0 ? -t : t;
}

inline double gelu_u(double x) { return kGeluC * (x + kGeluA * x * x * x); }

inline double gelu_value(double x, double t) { return 0.5 * x * (1.0 + t); }

inline double gelu_deriv(double x, double t) {
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

}  // namespace mogen::kern::detail
