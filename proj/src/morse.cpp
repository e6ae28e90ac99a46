#include "qthr/morse.hpp"

#include "qthr/errors.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace qthr {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * kPi);
} // namespace

double MorseParams::omega0() const { return std::sqrt(2.0 * V / (m * d * d)); }

double MorseParams::Y() const { return std::sqrt(8.0 * m * d * d * V) / hbar; }

void MorseParams::validate() const {
    auto pos = [](double x) { return std::isfinite(x) && x > 0.0; };
    if (!pos(V)) throw ValidationError("morse: V must be positive");
    if (!pos(d)) throw ValidationError("morse: d must be positive");
    if (!pos(m)) throw ValidationError("morse: m must be positive");
    if (!pos(hbar)) throw ValidationError("morse: hbar must be positive");
    if (!std::isfinite(z0)) throw ValidationError("morse: z0 must be finite");
}

double potential(const MorseParams& P, double z) {
    const double e = std::exp(-(z - P.z0) / P.d);
    return P.V * e * (e - 2.0);
}

double potential_d1(const MorseParams& P, double z) {
    const double e = std::exp(-(z - P.z0) / P.d);
    return 2.0 * P.V / P.d * e * (1.0 - e);
}

double potential_d2(const MorseParams& P, double z) {
    const double e = std::exp(-(z - P.z0) / P.d);
    return 2.0 * P.V / (P.d * P.d) * e * (2.0 * e - 1.0);
}

double y_of_z(const MorseParams& P, double z) {
    const double s = (P.z0 - z) / P.d;
    if (s > std::log(std::numeric_limits<double>::max() / P.Y()))
        throw OverflowError("y_of_z: exponent overflow at z=" + std::to_string(z));
    return P.Y() * std::exp(s);
}

double turning_point(const MorseParams& P, double E) {
    if (!(E > 0.0)) throw DomainError("turning_point: E must be positive");
    return P.z0 - P.d * std::log(1.0 + std::sqrt(1.0 + E / P.V));
}

double classical_momentum(const MorseParams& P, double z, double E) {
    const double kin = E - potential(P, z);
    if (!(kin > 0.0)) throw DomainError("classical_momentum: classically forbidden point");
    return std::sqrt(2.0 * P.m * kin);
}

double badlands(const MorseParams& P, double z, double E) {
    const double kin = E - potential(P, z);
    if (!(kin > 0.0)) throw DomainError("badlands: at or beyond the turning point");
    const double p2 = 2.0 * P.m * kin;
    const double v1 = potential_d1(P, z);
    const double v2 = potential_d2(P, z);
    const double m = P.m;
    return P.hbar * P.hbar *
           (1.25 * m * m * v1 * v1 / (p2 * p2 * p2) + 0.5 * m * v2 / (p2 * p2));
}

BadlandsPeak badlands_peak(const MorseParams& P, double E) {
    if (!(E > 0.0)) throw DomainError("badlands_peak: E must be positive");
    constexpr int n = 1000;
    const double lo = std::log(1e-3), hi = std::log(50.0);
    auto zk = [&](int i) { return P.z0 + P.d * std::exp(lo + (hi - lo) * i / (n - 1)); };
    int best = 0;
    double qbest = -1.0;
    for (int i = 0; i < n; ++i) {
        double q = std::abs(badlands(P, zk(i), E));
        if (q > qbest) {
            qbest = q;
            best = i;
        }
    }
    if (best == 0 || best == n - 1)
        throw ConvergenceError("badlands_peak: maximum at the scan boundary");
    auto neg = [&](double z) { return -std::abs(badlands(P, z, E)); };
    auto r = boost::math::tools::brent_find_minima(neg, zk(best - 1), zk(best + 1),
                                                   std::numeric_limits<double>::digits / 2);
    return {r.first, -r.second};
}

ReflectionValue reflection_amplitude(const MorseParams& P, double k) {
    P.validate();
    if (k == 0.0) return {0.0, cplx(-1.0, 0.0), true};
    const double Y = P.Y();
    const cplx mu(0.0, k * P.d);
    const cplx L = log_gamma(1.0 + 2.0 * mu) + log_gamma((1.0 - 2.0 * mu - Y) / 2.0) -
                   log_gamma(1.0 - 2.0 * mu) - log_gamma((1.0 + 2.0 * mu - Y) / 2.0);
    const cplx phase(0.0, -2.0 * k * P.z0 - 2.0 * k * P.d * std::log(Y));
    return {k, -std::exp(L + phase), false};
}

double threshold_slope(const MorseParams& P, double h) {
    const double ip = reflection_amplitude(P, h).amplitude.imag();
    const double im = reflection_amplitude(P, -h).amplitude.imag();
    return (ip - im) / (2.0 * h);
}

double threshold_slope_closed_form(const MorseParams& P) {
    P.validate();
    const double Y = P.Y();
    const double b = std::log(Y) + digamma((1.0 + Y) / 2.0) - kPi * std::tan(kPi * Y / 2.0) +
                     2.0 * euler_gamma;
    return 2.0 * P.d * b + 2.0 * P.z0;
}

double threshold_slope_verbatim(const MorseParams& P) {
    P.validate();
    const double Y = P.Y();
    const double b = std::log(Y) + P.d * digamma((1.0 + Y) / 2.0) -
                     kPi * std::tan(kPi * Y / 2.0) + 4.0 * euler_gamma;
    return 2.0 * P.d * b + 2.0 * P.z0;
}

double threshold_linearity_window(const MorseParams& P, double tol) {
    if (!(tol > 0.0 && tol < 0.5)) throw DomainError("threshold_linearity_window: tol in (0, 0.5)");
    const double s = threshold_slope(P);
    auto ok = [&](double k) {
        const double lin = s * k;
        return std::abs(reflection_amplitude(P, k).amplitude.imag() - lin) <= tol * std::abs(lin);
    };
    const double k_lo = 1e-8 / P.d, k_hi = 10.0 / P.d;
    constexpr int per_decade = 200;
    const int n = static_cast<int>(std::log10(k_hi / k_lo) * per_decade);
    double good = 0.0, bad = k_lo;
    bool found = false;
    for (int i = 0; i <= n; ++i) {
        const double k = k_lo * std::pow(10.0, static_cast<double>(i) / per_decade);
        if (!ok(k)) {
            bad = k;
            found = true;
            break;
        }
        good = k;
    }
    if (!found) return k_hi;
    for (int it = 0; it < 100 && bad - good > 1e-12 * bad; ++it) {
        const double mid = 0.5 * (good + bad);
        (ok(mid) ? good : bad) = mid;
    }
    return good;
}

ScatteringState::ScatteringState(const MorseParams& P, double k) : P_(P), k_(k) {
    P.validate();
    if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("scattering state requires k > 0");
    Yp_ = P.Y();
    const cplx mu(0.0, k * P.d);
    a_ = (1.0 + 2.0 * mu - Yp_) / 2.0;
    b_ = 1.0 + 2.0 * mu;
    R_ = reflection_amplitude(P, k).amplitude;
    u_pref_ = kInvSqrt2Pi * std::exp(log_gamma((1.0 - 2.0 * mu - Yp_) / 2.0) - log_gamma(-2.0 * mu));
}

cplx ScatteringState::operator()(double z) const {
    const double y = y_of_z(P_, z);
    const cplx em = std::polar(1.0, -k_ * z);
    if (y <= y_switch) {
        const cplx ms = kummer_m_scaled(a_, b_, y);
        return kInvSqrt2Pi * std::exp(0.5 * y) * (em * ms + R_ * std::conj(em) * std::conj(ms));
    }
    const AsymptoticValue u = kummer_u_asymptotic(a_, b_, y);
    return u_pref_ * em * std::exp(-0.5 * y) * u.value;
}

cplx scattering_wavefunction(const MorseParams& P, double k, double z) {
    return ScatteringState(P, k)(z);
}

} // namespace qthr
