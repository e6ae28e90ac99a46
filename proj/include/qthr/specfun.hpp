#pragma once

#include <complex>

namespace qthr {

using cplx = std::complex<double>;

/// Euler-Mascheroni constant.
inline constexpr double euler_gamma = 0.57721566490153286060651209008240243;

struct KummerOptions {
    double y_max = 700.0;     // largest admissible argument (exponent scale)
    long max_terms = 100000;  // hard cap on series length
};

/// Kummer's confluent hypergeometric function M(a,b,y) for real y >= 0.
/// Throws OverflowError when e^y * (scaled value) is not representable.
cplx kummer_m(cplx a, cplx b, double y, const KummerOptions& opt = {});

/// exp(-y) * M(a,b,y); finite for every y <= y_max.
cplx kummer_m_scaled(cplx a, cplx b, double y, const KummerOptions& opt = {});

/// Leading large-y form Gamma(b)/Gamma(a) e^y y^(a-b). Cross-check only.
cplx kummer_m_asymptotic(cplx a, cplx b, double y);

/// Tricomi U(a,b,y) from its large-y asymptotic series, truncated at the
/// smallest term. Returns the value and the size of the first omitted term.
struct AsymptoticValue {
    cplx value;
    double truncation;
};
AsymptoticValue kummer_u_asymptotic(cplx a, cplx b, double y);

/// Principal branch of log Gamma(z).
cplx log_gamma(cplx z);

/// Digamma function for real x > 0.
double digamma(double x);

} // namespace qthr
