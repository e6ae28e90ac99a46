#pragma once

#include "qthr/morse.hpp"
#include "qthr/qdyn.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace qthr {

struct PhaseSample {
    double q;
    double p;
    double weight = 1.0;
};

enum class Sampling { Plain, Antithetic };
enum class TransitMode { Tabulated, Direct };

struct EnsembleConfig {
    long long n_traj = 10'000'000;
    std::uint64_t seed = 1;
    double energy_tolerance = 1e-9;
    double z_cut = 0.0;  // 0 selects the automatic radius |V(z_cut)| = 1e-6 E_i
    Sampling sampling = Sampling::Antithetic;
    TransitMode transit = TransitMode::Tabulated;
    int threads = 0;

    void validate() const;
};

/// Radius beyond which |V| < frac * E.
double auto_z_cut(const MorseParams& P, double E, double frac = 1e-6);
double resolve_z_cut(const MorseParams& P, const CoherentState& s, const EnsembleConfig& cfg);

/// Wigner-distribution samples keyed by trajectory index.
class SampleStream {
public:
    SampleStream(const CoherentState& s, const EnsembleConfig& cfg, double hbar = 1.0);
    PhaseSample operator()(std::uint64_t index) const;
    double sigma_q() const { return sq_; }
    double sigma_p() const { return sp_; }

private:
    CoherentState s_;
    std::uint64_t seed_;
    Sampling sampling_;
    double sq_, sp_;
};

std::vector<PhaseSample> sample_initial(const CoherentState& s, const EnsembleConfig& cfg,
                                        std::size_t count, std::uint64_t offset = 0,
                                        double hbar = 1.0);

struct TrajectoryOptions {
    double y = std::numeric_limits<double>::quiet_NaN();  // crossing target (outgoing)
    double z_cut = 30.0;
    double energy_tolerance = 1e-9;
    bool potential_off = false;
    double t_max = std::numeric_limits<double>::infinity();
};

struct CrossingRecord {
    bool crossed = false;
    double t_c = std::numeric_limits<double>::quiet_NaN();
    double v_c = std::numeric_limits<double>::quiet_NaN();
};

struct TrajectoryResult {
    std::vector<double> positions;  // at the requested event times
    CrossingRecord crossing;
    double energy = 0.0;
    double z_turn = std::numeric_limits<double>::quiet_NaN();
    double t_turn = std::numeric_limits<double>::quiet_NaN();
    double t_in = std::numeric_limits<double>::quiet_NaN();    // entry into |z| < z_cut
    double t_exit = std::numeric_limits<double>::quiet_NaN();  // exit from it
    double max_drift = 0.0;
};

/// Hamiltonian evolution on the Morse potential; free flight beyond z_cut.
TrajectoryResult evolve_trajectory(const MorseParams& P, const PhaseSample& s,
                                   const std::vector<double>& t_events,
                                   const TrajectoryOptions& opt = {});

/// Time from entry at z_cut (momentum magnitude p far away) to exit at z_cut, integrated.
double transit_time(const MorseParams& P, double z_cut, double p, double energy_tolerance = 1e-9,
                    double* max_drift = nullptr);

/// Interaction-region transit time tau(p) = t_exit - t_in for an incoming free
/// particle of momentum magnitude p, Chebyshev-interpolated on [p_lo, p_hi].
class TransitTable {
public:
    TransitTable(const MorseParams& P, double z_cut, double p_lo, double p_hi,
                 double energy_tolerance = 1e-9, int nodes = 64);
    bool contains(double p) const { return p >= p_lo_ && p <= p_hi_; }
    double operator()(double p) const;
    double direct(double p) const;
    int nodes() const { return static_cast<int>(c_.size()); }
    double check_error() const { return check_error_; }
    double max_drift() const { return max_drift_; }

private:
    MorseParams P_;
    double z_cut_, p_lo_, p_hi_, tol_;
    std::vector<double> c_;
    double check_error_ = 0.0;
    mutable double max_drift_ = 0.0;
};

enum class DensityNormalization { PerSlice, Ensemble, Counts };

/// Histogram of trajectory positions; one density per z axis, common t axis.
std::vector<SpaceTimeDensity> density_grids(const MorseParams& P, const CoherentState& s,
                                            const EnsembleConfig& cfg,
                                            const std::vector<std::vector<double>>& z_axes,
                                            const std::vector<double>& t_axis,
                                            DensityNormalization norm = DensityNormalization::PerSlice);

/// Converts a raw-count grid (uniform z bins) in place.
void normalize_counts(SpaceTimeDensity& d, DensityNormalization norm, long long n_traj);

SpaceTimeDensity density_grid(const MorseParams& P, const CoherentState& s, const EnsembleConfig& cfg,
                              const std::vector<double>& z_axis, const std::vector<double>& t_axis,
                              DensityNormalization norm = DensityNormalization::PerSlice);

struct FlightTimeW {
    double mean = 0.0;
    double stderr_ = 0.0;
    long long n_traj = 0;
    long long n_no_crossing = 0;
    long long n_direct = 0;      // trajectories integrated individually
    int table_nodes = 0;
    double table_error = 0.0;
    double max_drift = 0.0;
    double z_cut = 0.0;
};

/// Crossing-weighted estimator sum(t_c/|v_c|) / sum(1/|v_c|) with block jackknife error.
FlightTimeW mean_flight_time_w(const MorseParams& P, const CoherentState& s, const EnsembleConfig& cfg,
                               double y, double t_max = std::numeric_limits<double>::infinity());

/// Direct alternative: histogram C_t at y (bin width dz) on t_axis, then the first moment.
double mean_flight_time_w_histogram(const MorseParams& P, const CoherentState& s,
                                    const EnsembleConfig& cfg, double y,
                                    const std::vector<double>& t_axis, double dz);

double free_flight_time(const MorseParams& P, const CoherentState& s, double y);

} // namespace qthr
