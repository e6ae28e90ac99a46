#pragma once

#include "qthr/morse.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qthr {

/// Gaussian packet centred at z_i with incident momentum -p_i and width parameter gamma.
struct CoherentState {
    double z_i = 100.0;
    double p_i = 1.0;
    double gamma = 1e-2;

    void validate() const;
    cplx amplitude(double z, double hbar = 1.0) const;
    double density(double z) const;
    double energy(double m = 1.0) const { return p_i * p_i / (2.0 * m); }
};

enum class KRule { Trapezoid, GaussLegendre };

struct KGrid {
    double k_min = 0.0;
    double k_max = 0.0;
    long n = 50000;
    KRule rule = KRule::Trapezoid;

    /// [p_i/hbar - 7 sqrt(gamma), p_i/hbar + 7 sqrt(gamma)]
    static KGrid for_state(const MorseParams& P, const CoherentState& s, long n = 50000,
                           KRule rule = KRule::Trapezoid);
    void nodes(std::vector<double>& k, std::vector<double>& w) const;
    void validate() const;
};

enum class Provenance { Quantum, Wigner };

struct SpaceTimeDensity {
    std::vector<double> z_axis;
    std::vector<double> t_axis;
    std::vector<double> values;  // values[iz * nt + it]
    Provenance provenance = Provenance::Quantum;

    std::size_t nz() const { return z_axis.size(); }
    std::size_t nt() const { return t_axis.size(); }
    double& at(std::size_t iz, std::size_t it) { return values[iz * nt() + it]; }
    double at(std::size_t iz, std::size_t it) const { return values[iz * nt() + it]; }
    double max_value() const;
    void validate() const;
};

std::vector<double> linspace(double a, double b, std::size_t n);

void write_density_csv(const SpaceTimeDensity& d, const std::string& path);
/// Flat binary grid: "QTRD", u32 version, u64 nz, u64 nt, z axis, t axis,
/// row-major values; little-endian 64-bit floats.
void write_density_qtrd(const SpaceTimeDensity& d, const std::string& path);
SpaceTimeDensity read_density_qtrd(const std::string& path);

/// <k+|Phi> from the asymptotic form of the scattering state.
cplx overlap_k(const MorseParams& P, const CoherentState& s, double k);

struct PropagateOptions {
    int threads = 0;
    long k_chunk = 4096;
    bool self_test = true;
    bool quadrature_check = true;
    int check_cells = 100;
    std::uint64_t seed = 12345;
    bool keep_amplitude = false;
};

struct PropagateResult {
    SpaceTimeDensity density;
    std::vector<cplx> amplitude;  // filled when keep_amplitude
    double self_test_error = 0.0; // t = 0 density error relative to the peak
    double quadrature_change = 0.0;
    bool quadrature_warning = false;
};

PropagateResult propagate(const MorseParams& P, const CoherentState& s, const KGrid& kg,
                          const std::vector<double>& z_axis, const std::vector<double>& t_axis,
                          const PropagateOptions& opt = {});

/// |<y|K_t|Phi>|^2 on a set of times.
std::vector<double> correlation_series(const MorseParams& P, const CoherentState& s,
                                       const KGrid& kg, double y, const std::vector<double>& t,
                                       int threads = 0);
double correlation_at(const MorseParams& P, const CoherentState& s, double y, double t);

struct FlightTimeQM {
    double mean = 0.0;
    double normalization = 0.0;
    double t_begin = 0.0, t_end = 0.0;
    double peak_time = 0.0;
    double tail_fraction = 0.0;  // share of the integral in the last tenth of the window
    int extensions = 0;
};

struct FlightTimeOptions {
    long n_t = 4000;
    int max_extensions = 12;
    int threads = 0;
};

FlightTimeQM mean_flight_time_qm(const MorseParams& P, const CoherentState& s, double y,
                                 double t_begin, double t_end, const KGrid& kg,
                                 const FlightTimeOptions& opt = {});

} // namespace qthr
