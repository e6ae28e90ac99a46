#include "qthr/specfun.hpp"

#include "qthr/errors.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace qthr {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kHalfLog2Pi = 0.91893853320467274178032973640561764;

bool near_nonpositive_integer(cplx z, double tol = 1e-14) {
    if (z.real() > tol) return false;
    double r = std::round(z.real());
    return std::abs(z - cplx(r, 0.0)) < tol;
}

void check_kummer_args(cplx a, cplx b, double y, const KummerOptions& opt) {
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()) || !std::isfinite(b.real()) ||
        !std::isfinite(b.imag()))
        throw DomainError("kummer_m: non-finite parameter");
    if (near_nonpositive_integer(b))
        throw DomainError("kummer_m: b is a nonpositive integer");
    if (!(y >= 0.0) || !std::isfinite(y))
        throw DomainError("kummer_m: y must be finite and nonnegative");
    if (y > opt.y_max)
        throw DomainError("kummer_m: y=" + std::to_string(y) + " exceeds y_max");
}

// Sum_n (a)_n/(b)_n y^n/n!, first term t0.
cplx kummer_series(cplx a, cplx b, double y, double t0, long max_terms) {
    cplx term(t0, 0.0);
    cplx sum = term;
    int small = 0;
    for (long n = 0; n < max_terms; ++n) {
        const double dn = static_cast<double>(n);
        cplx next = term * ((a + dn) / (b + dn)) * (y / (dn + 1.0));
        sum += next;
        if (std::abs(next) <= 1e-16 * std::abs(sum) && std::abs(next) <= std::abs(term)) {
            if (++small >= 10) return sum;
        } else {
            small = 0;
        }
        term = next;
    }
    throw ConvergenceError("kummer_m: series did not converge within " + std::to_string(max_terms) +
                           " terms");
}

} // namespace

cplx kummer_m_scaled(cplx a, cplx b, double y, const KummerOptions& opt) {
    check_kummer_args(a, b, y, opt);
    return kummer_series(a, b, y, std::exp(-y), opt.max_terms);
}

cplx kummer_m(cplx a, cplx b, double y, const KummerOptions& opt) {
    check_kummer_args(a, b, y, opt);
    if (y <= 30.0) return kummer_series(a, b, y, 1.0, opt.max_terms);
    cplx s = kummer_series(a, b, y, std::exp(-y), opt.max_terms);
    double mag = std::abs(s);
    if (mag == 0.0) return s;
    double log_mag = std::log(mag) + y;
    if (log_mag > std::log(std::numeric_limits<double>::max()))
        throw OverflowError("kummer_m: result overflows at y=" + std::to_string(y) +
                            "; use kummer_m_scaled");
    return std::polar(std::exp(log_mag), std::arg(s));
}

cplx kummer_m_asymptotic(cplx a, cplx b, double y) {
    if (!(y > 0.0)) throw DomainError("kummer_m_asymptotic: y must be positive");
    return std::exp(log_gamma(b) - log_gamma(a) + y + (a - b) * std::log(y));
}

AsymptoticValue kummer_u_asymptotic(cplx a, cplx b, double y) {
    if (!(y > 0.0)) throw DomainError("kummer_u_asymptotic: y must be positive");
    const cplx c = a - b + 1.0;
    cplx term(1.0, 0.0);
    cplx sum = term;
    double trunc = 0.0;
    for (int n = 0; n < 1000; ++n) {
        const double dn = static_cast<double>(n);
        cplx next = term * (a + dn) * (c + dn) / ((dn + 1.0) * -y);
        if (std::abs(next) >= std::abs(term)) {
            trunc = std::abs(next);
            break;
        }
        sum += next;
        term = next;
        if (std::abs(term) <= 1e-17 * std::abs(sum)) {
            trunc = std::abs(term);
            break;
        }
    }
    return {sum * std::exp(-a * std::log(y)), trunc * std::abs(std::exp(-a * std::log(y)))};
}

cplx log_gamma(cplx z) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw DomainError("log_gamma: non-finite argument");
    if (near_nonpositive_integer(z)) throw PoleError("log_gamma: pole at nonpositive integer");
    cplx shift(0.0, 0.0);
    while (z.real() < 10.0) {
        shift += std::log(z);
        z += 1.0;
    }
    static constexpr std::array<double, 10> c = {
        1.0 / 12.0,          -1.0 / 360.0,       1.0 / 1260.0,        -1.0 / 1680.0,
        1.0 / 1188.0,        -691.0 / 360360.0,  1.0 / 156.0,         -3617.0 / 122400.0,
        43867.0 / 244188.0,  -174611.0 / 125400.0};
    const cplx zi = 1.0 / z;
    const cplx zi2 = zi * zi;
    cplx series(0.0, 0.0);
    cplx p = zi;
    for (double ck : c) {
        series += ck * p;
        p *= zi2;
    }
    return (z - 0.5) * std::log(z) - z + kHalfLog2Pi + series - shift;
}

double digamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("digamma: x must be positive");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double xi2 = 1.0 / (x * x);
    double tail = xi2 * (1.0 / 12.0 -
                  xi2 * (1.0 / 120.0 -
                  xi2 * (1.0 / 252.0 -
                  xi2 * (1.0 / 240.0 -
                  xi2 * (1.0 / 132.0 -
                  xi2 * (691.0 / 32760.0 -
                  xi2 * (1.0 / 12.0)))))));
    return acc + std::log(x) - 0.5 / x - tail;
}

} // namespace qthr
