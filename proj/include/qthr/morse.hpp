#pragma once

#include "qthr/specfun.hpp"

#include <vector>

namespace qthr {

struct MorseParams {
    double V = 1.0;     // well depth
    double d = 1.0;     // range (inverse stiffness)
    double z0 = 0.0;    // well minimum
    double m = 1.0;     // mass
    double hbar = 1.0;

    double omega0() const;
    double Y() const;
    /// Throws ValidationError unless every parameter is finite and V, d, m, hbar > 0.
    void validate() const;
};

double potential(const MorseParams& P, double z);
/// dV/dz and d2V/dz2 in closed form.
double potential_d1(const MorseParams& P, double z);
double potential_d2(const MorseParams& P, double z);
double y_of_z(const MorseParams& P, double z);
double turning_point(const MorseParams& P, double E);
double classical_momentum(const MorseParams& P, double z, double E);

/// Quantality function Q(z) at energy E.
double badlands(const MorseParams& P, double z, double E);

struct BadlandsPeak {
    double z_bf;
    double q_max;  // |Q(z_bf)|
};
/// Global maximum of |Q| over the attractive tail [z0 + 1e-3 d, z0 + 50 d].
BadlandsPeak badlands_peak(const MorseParams& P, double E);

struct ReflectionValue {
    double k;
    cplx amplitude;  // referenced to z0 as in the closed form, i.e. includes exp(-2ikz0)
    bool limit;      // true for the k = 0 limit value
};

/// Closed-form Morse reflection amplitude; valid for any real k (R(-k) = conj R(k)).
ReflectionValue reflection_amplitude(const MorseParams& P, double k);

/// d(Im R)/dk at k = 0 by central difference at k = +-h.
double threshold_slope(const MorseParams& P, double h = 1e-6);
/// Analytic derivative of the closed form at k = 0.
double threshold_slope_closed_form(const MorseParams& P);
/// The bracketed small-k expression exactly as it is usually printed (4 gamma, d*digamma).
double threshold_slope_verbatim(const MorseParams& P);

/// Largest k with |Im R(k) - slope k| <= tol |slope k| on (0, k].
double threshold_linearity_window(const MorseParams& P, double tol);

/// Scattering state Psi+_k(z) with per-k constants cached.
class ScatteringState {
public:
    ScatteringState(const MorseParams& P, double k);
    cplx operator()(double z) const;
    double k() const { return k_; }
    cplx R() const { return R_; }

    /// Beyond this y the decaying Tricomi representation is used.
    static constexpr double y_switch = 25.0;

private:
    MorseParams P_;
    double k_;
    double Yp_;
    cplx a_, b_, R_, u_pref_;
};

cplx scattering_wavefunction(const MorseParams& P, double k, double z);

} // namespace qthr
