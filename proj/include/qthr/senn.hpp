#pragma once

#include "qthr/morse.hpp"
#include "qthr/specfun.hpp"

#include <functional>
#include <string>
#include <vector>

namespace qthr {

enum class Topology { TwoSided, RightWall };

/// A 1D potential for the general reflection solver.
/// TwoSided: V negligible outside (-xi, xi). RightWall: V negligible for x < -xi and
/// rising to a repulsive wall at large positive x.
struct PotentialModel {
    std::function<double(double)> evaluate;
    double xi = 1.0;
    Topology topology = Topology::TwoSided;
    double support_tol = 1e-12;
    double mass = 1.0;
    double hbar = 1.0;
    std::vector<double> breakpoints;  // interior discontinuities of V
    double stiffness_bound = 1e10;    // |V| above this raises StiffnessError
    std::string name = "custom";

    void validate() const;
};

/// Values of the fundamental solutions at x = xi:
/// p = v'(xi), q = u(xi), s = -v(xi), w = u'(xi).
struct BoundaryData {
    double p, q, s, w, k;
    double max_wronskian_drift;
};

BoundaryData fundamental_solutions(const PotentialModel& model, double k);

/// Reflection amplitude in the matching convention of the boundary equations
/// (incident wave normalized as exp(ik(x + 2 xi))).
cplx reflection_amplitude_general(const PotentialModel& model, double k);
double reflection_probability(const PotentialModel& model, double k);
cplx transmission_amplitude(const PotentialModel& model, double k);
cplx reflection_amplitude_wall(const PotentialModel& model, double k);

/// Same quantities for psi = exp(ikx) + R exp(-ikx) (left), T exp(ikx) (right).
cplx reflection_origin(cplx r_matching, double k, double xi);
cplx transmission_origin(cplx t_matching, double k, double xi);

/// Effective (q, s) of the decaying interior solution for a RightWall model.
struct WallData {
    double q_eff, s_eff, x_deep;
};
WallData wall_solution(const PotentialModel& model, double k);

/// k -> 0 limit of the boundary data by Richardson extrapolation in k^2 over
/// k in {1e-3, 5e-4, 2.5e-4}; error estimates against a direct k = 0 solve.
struct ThresholdLimit {
    double p, q, s, w;
    double w_error;         // |extrapolated w - direct k=0 w|
    double r2_resonant;     // (p-q)^2/(p+q)^2
    double r2_error;
    bool resonant(double w_tol) const { return std::abs(w) <= w_tol; }
};
ThresholdLimit threshold_limit(const PotentialModel& model);

/// Grow xi until |V(-xi)| (and |V(xi)| for TwoSided) is below support_tol.
void auto_support(PotentialModel& model, double scale = 1.0);

PotentialModel square_well(double V0, double a);
PotentialModel square_barrier(double V0, double a);
/// Well of depth V1 on (-a, 0) and V2 on (0, a).
PotentialModel two_step_well(double V1, double V2, double a);
PotentialModel gaussian_well(double V0, double sigma);
/// Morse potential mirrored by x = -z so the wall sits at large positive x.
PotentialModel morse_wall(const MorseParams& P);
/// Cubic (modified Akima) interpolation of (x, V) samples.
PotentialModel tabulated_potential(std::vector<double> x, std::vector<double> v, Topology topo);
PotentialModel load_tabulated_potential(const std::string& path, Topology topo);

} // namespace qthr
