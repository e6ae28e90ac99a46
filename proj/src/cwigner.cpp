#include "qthr/cwigner.hpp"

#include "qthr/detail/ode.hpp"
#include "qthr/detail/parallel.hpp"
#include "qthr/errors.hpp"

#include <boost/math/special_functions/chebyshev.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <memory>
#include <random>
#include <utility>
#include <string>

namespace qthr {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
using State2 = std::array<double, 2>;

struct DriftExceeded {};

/// SplitMix64 as a uniform random bit generator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;
    explicit SplitMix64(std::uint64_t s) : x_(s) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() {
        std::uint64_t z = (x_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t x_;
};

std::uint64_t mix_key(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 g(seed ^ (index * 0xd1342543de82ef95ULL));
    g();
    return g() ^ index;
}

/// Cubic Hermite interpolant of q on [t0, t1] with slopes v0, v1.
struct Hermite {
    double t0, h, q0, q1, v0, v1;
    double value(double t) const {
        const double s = (t - t0) / h, s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * q0 + (s3 - 2 * s2 + s) * h * v0 + (-2 * s3 + 3 * s2) * q1 +
               (s3 - s2) * h * v1;
    }
    double slope(double t) const {
        const double s = (t - t0) / h, s2 = s * s;
        return ((6 * s2 - 6 * s) * q0 + (3 * s2 - 4 * s + 1) * h * v0 + (-6 * s2 + 6 * s) * q1 +
                (3 * s2 - 2 * s) * h * v1) / h;
    }
    /// Linear interpolation for the root of value(t) = target, then one Newton step.
    double root(double target) const {
        double t = t0 + h * (target - q0) / (q1 - q0);
        const double d = slope(t);
        if (d != 0.0) t -= (value(t) - target) / d;
        return std::clamp(t, t0, t0 + h);
    }
};

struct InsideResult {
    bool exited = false;
    double t_exit = 0.0;
    double z_turn = std::numeric_limits<double>::quiet_NaN();
    double t_turn = std::numeric_limits<double>::quiet_NaN();
    double max_drift = 0.0;
    CrossingRecord cross;
    std::size_t filled = 0;
};

/// Integrates inside |z| < z_cut from (t0, q0, p0) until the outward exit at z_cut.
/// Positions at event times (sorted, all > t0) are written until the exit.
InsideResult integrate_inside(const MorseParams& P, double z_cut, double E, double t0, double q0,
                              double p0, double tol, const double* ev, std::size_t n_ev,
                              double* ev_q, double y, double t_max, double rel = 1e-12) {
    const double m = P.m, V = P.V, d = P.d, z0 = P.z0;
    const double fpref = 2.0 * V / d;
    auto sys = [&](const State2& x, State2& dx, double) {
        const double e = std::exp(-(x[0] - z0) / d);
        dx[0] = x[1] / m;
        dx[1] = -fpref * e * (1.0 - e);
    };
    for (double factor = 1.0; factor >= 1e-4; factor *= 1e-2) {
        InsideResult r;
        try {
            // local clock, t0 subtracted
            State2 x{q0, p0};
            double t = 0.0, tp = 0.0;
            const double tl_max = t_max - t0;
            double kmax = p0 * p0 / (2.0 * m);
            const double scale = std::sqrt(p0 * p0 + 2.0 * m * V);
            double dt = 0.05 * d * m / scale;
            const double horizon = 20.0 * (z_cut - z0 + 10.0 * d) * m / std::max(std::abs(p0), 1e-300) +
                                   200.0 * d * m / scale;
            State2 xp = x;
            // Newton on the integrated trajectory from the last accepted state
            auto refine = [&](double guess, auto resid) {
                State2 xr = xp;
                for (int it = 0; it < 3; ++it) {
                    xr = xp;
                    detail::integrate_segment(sys, xr, tp, guess, 1e-2 * rel * factor * scale, rel * factor,
                                              [](const State2&, double) { return true; });
                    const auto [f, df] = resid(xr);
                    if (df == 0.0) break;
                    const double step = f / df;
                    guess -= step;
                    if (std::abs(step) <= 1e-15 * std::max(std::abs(guess), 1.0)) break;
                }
                return std::pair<double, State2>{guess, xr};
            };
            auto obs = [&](State2& s, double tc) {
                const double q = s[0];
                const double k = s[1] * s[1] / (2.0 * m);
                kmax = std::max(kmax, k);
                const double vq = potential(P, q);
                const double drift = std::abs(k + vq - E) / std::max(std::abs(E), kmax);
                r.max_drift = std::max(r.max_drift, drift);
                if (drift > tol) throw DriftExceeded{};
                // back onto the energy shell away from the turning region
                if (E > 0.0 && E - vq >= 0.25 * E) s[1] = std::copysign(std::sqrt(2.0 * m * (E - vq)), s[1]);
                const double p = s[1];
                const double h = tc - tp;
                const double qp = xp[0], pp = xp[1];
                if (pp < 0.0 && p >= 0.0 && h > 0.0) {
                    const Hermite H{tp, h, qp, q, pp / m, p / m};
                    double ts = tp + h * (-pp) / (p - pp);
                    const double fs = -potential_d1(P, H.value(ts));
                    if (fs != 0.0) ts = std::clamp(ts - m * H.slope(ts) / fs, tp, tc);
                    const auto [tr, xr] = refine(ts, [&](const State2& z) {
                        return std::pair<double, double>{z[1], -potential_d1(P, z[0])};
                    });
                    r.t_turn = t0 + tr;
                    r.z_turn = xr[0];
                }
                if (p > 0.0 && h > 0.0) {
                    const Hermite H{tp, h, qp, q, pp / m, p / m};
                    if (!r.cross.crossed && std::isfinite(y) && qp < y && q >= y) {
                        const auto [tr, xr] = refine(H.root(y), [&](const State2& z) {
                            return std::pair<double, double>{z[0] - y, z[1] / m};
                        });
                        r.cross = {true, t0 + tr, xr[1] / m};
                    }
                    if (qp < z_cut && q >= z_cut) {
                        const auto [tr, xr] = refine(H.root(z_cut), [&](const State2& z) {
                            return std::pair<double, double>{z[0] - z_cut, z[1] / m};
                        });
                        r.exited = true;
                        r.t_exit = t0 + tr;
                        return false;
                    }
                }
                tp = tc;
                xp = s;
                t = tc;
                return true;
            };
            std::size_t idx = 0;
            while (!r.exited && t < tl_max) {
                const bool is_event = idx < n_ev;
                double target = is_event ? ev[idx] - t0 : t + horizon;
                if (target > tl_max) target = tl_max;
                dt = detail::integrate_segment(sys, x, t, target, 1e-2 * rel * factor * scale, rel * factor, obs, dt);
                if (r.exited) break;
                t = target;
                if (is_event && target == ev[idx] - t0) ev_q[idx++] = x[0];
            }
            r.filled = idx;
            return r;
        } catch (const DriftExceeded&) {
            continue;
        }
    }
    throw EnergyDriftError("classical trajectory: energy drift above tolerance at the step-size floor");
}

double uniform_step(const std::vector<double>& a, const char* what) {
    if (a.size() < 2) throw ValidationError(std::string(what) + ": need at least 2 points");
    const double h = (a.back() - a.front()) / static_cast<double>(a.size() - 1);
    for (std::size_t i = 1; i < a.size(); ++i)
        if (std::abs(a[i] - a[i - 1] - h) > 1e-9 * std::abs(h) + 1e-12 * std::abs(a[i]))
            throw ValidationError(std::string(what) + ": axis must be uniform");
    if (!(h > 0.0)) throw ValidationError(std::string(what) + ": axis must increase");
    return h;
}

} // namespace

void EnsembleConfig::validate() const {
    if (n_traj < 1000) throw ValidationError("ensemble: n_traj must be >= 1000");
    if (!(energy_tolerance > 0.0)) throw ValidationError("ensemble: energy_tolerance must be positive");
    if (z_cut < 0.0 || !std::isfinite(z_cut)) throw ValidationError("ensemble: z_cut must be >= 0");
}

double auto_z_cut(const MorseParams& P, double E, double frac) {
    if (!(E > 0.0)) throw DomainError("auto_z_cut: E must be positive");
    // V e^{-s}(2 - e^{-s}) = frac E  on the attractive tail
    const double eps = frac * E / P.V;
    if (eps >= 1.0) return P.z0 + P.d * std::log(2.0);
    const double u = eps / (1.0 + std::sqrt(1.0 - eps));
    return P.z0 - P.d * std::log(u);
}

double resolve_z_cut(const MorseParams& P, const CoherentState& s, const EnsembleConfig& cfg) {
    const double auto_cut = auto_z_cut(P, s.energy(P.m));
    if (cfg.z_cut == 0.0) return auto_cut;
    if (std::abs(potential(P, cfg.z_cut)) >= 1e-6 * s.energy(P.m))
        throw ValidationError("ensemble: z_cut too small, |V(z_cut)| must be < 1e-6 E_i");
    return cfg.z_cut;
}

SampleStream::SampleStream(const CoherentState& s, const EnsembleConfig& cfg, double hbar)
    : s_(s), seed_(cfg.seed), sampling_(cfg.sampling) {
    s.validate();
    sq_ = std::sqrt(1.0 / (2.0 * s.gamma));
    sp_ = hbar * std::sqrt(s.gamma / 2.0);
}

PhaseSample SampleStream::operator()(std::uint64_t index) const {
    const bool anti = sampling_ == Sampling::Antithetic;
    const std::uint64_t key = anti ? index / 2 : index;
    SplitMix64 g(mix_key(seed_, key));
    std::normal_distribution<double> nd;
    double gq = nd(g);
    double gp = nd(g);
    if (anti && (index & 1)) {
        gq = -gq;
        gp = -gp;
    }
    return {s_.z_i + sq_ * gq, -s_.p_i + sp_ * gp, 1.0};
}

std::vector<PhaseSample> sample_initial(const CoherentState& s, const EnsembleConfig& cfg,
                                        std::size_t count, std::uint64_t offset, double hbar) {
    SampleStream st(s, cfg, hbar);
    std::vector<PhaseSample> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = st(offset + i);
    return out;
}

TrajectoryResult evolve_trajectory(const MorseParams& P, const PhaseSample& s,
                                   const std::vector<double>& t_events, const TrajectoryOptions& opt) {
    P.validate();
    for (std::size_t i = 1; i < t_events.size(); ++i)
        if (t_events[i] < t_events[i - 1]) throw ValidationError("evolve_trajectory: event times must be sorted");
    const double m = P.m, zc = opt.z_cut, y = opt.y;
    TrajectoryResult r;
    r.positions.resize(t_events.size());
    const std::size_t n = t_events.size();

    auto free_from = [&](double t0, double q0, double p, std::size_t from) {
        for (std::size_t i = from; i < n; ++i) r.positions[i] = q0 + p * (t_events[i] - t0) / m;
    };

    if (opt.potential_off || (s.q >= zc && s.p >= 0.0)) {
        r.energy = s.p * s.p / (2.0 * m);
        free_from(0.0, s.q, s.p, 0);
        if (std::isfinite(y) && s.p != 0.0 && (y - s.q) / s.p >= 0.0) {
            const double tc = (y - s.q) * m / s.p;
            if (tc <= opt.t_max) r.crossing = {true, tc, s.p / m};
        }
        return r;
    }

    double t_in, q_in, p_in;
    if (s.q >= zc) {
        r.energy = s.p * s.p / (2.0 * m);
        t_in = (s.q - zc) * m / -s.p;
        q_in = zc;
        const double kin = r.energy - potential(P, zc);
        p_in = -std::sqrt(2.0 * m * kin);
    } else {
        r.energy = s.p * s.p / (2.0 * m) + potential(P, s.q);
        t_in = 0.0;
        q_in = s.q;
        p_in = s.p;
    }
    r.t_in = t_in;
    std::size_t first_inside = 0;
    while (first_inside < n && t_events[first_inside] <= t_in) {
        r.positions[first_inside] = s.q + s.p * t_events[first_inside] / m;
        ++first_inside;
    }
    const double y_inside = (std::isfinite(y) && y < zc) ? y : std::numeric_limits<double>::quiet_NaN();
    InsideResult in = integrate_inside(P, zc, r.energy, t_in, q_in, p_in, opt.energy_tolerance,
                                       t_events.data() + first_inside, n - first_inside,
                                       r.positions.data() + first_inside, y_inside, opt.t_max);
    r.max_drift = in.max_drift;
    r.z_turn = in.z_turn;
    r.t_turn = in.t_turn;
    if (!in.exited) {
        for (std::size_t i = first_inside + in.filled; i < n; ++i)
            r.positions[i] = std::numeric_limits<double>::quiet_NaN();
        if (in.cross.crossed && in.cross.t_c <= opt.t_max) r.crossing = in.cross;
        return r;
    }
    r.t_exit = in.t_exit;
    const double p_out = std::sqrt(2.0 * m * r.energy);
    free_from(in.t_exit, zc, p_out, first_inside + in.filled);
    if (in.cross.crossed) {
        r.crossing = in.cross;
    } else if (std::isfinite(y) && y >= zc) {
        r.crossing = {true, in.t_exit + (y - zc) * m / p_out, p_out / m};
    }
    if (r.crossing.crossed && r.crossing.t_c > opt.t_max) r.crossing = {};
    return r;
}

TransitTable::TransitTable(const MorseParams& P, double z_cut, double p_lo, double p_hi,
                           double energy_tolerance, int nodes)
    : P_(P), z_cut_(z_cut), p_lo_(p_lo), p_hi_(p_hi), tol_(energy_tolerance) {
    if (!(p_hi > p_lo) || !(p_lo > 0.0)) throw ValidationError("transit table: need 0 < p_lo < p_hi");
    const double mid = 0.5 * (p_hi + p_lo), half = 0.5 * (p_hi - p_lo);
    for (int N = std::max(nodes, 4); N <= 1024; N *= 2) {
        std::vector<double> f(N);
        for (int j = 0; j < N; ++j) f[j] = direct(mid + half * std::cos(kPi * (j + 0.5) / N));
        c_.assign(N, 0.0);
        for (int i = 0; i < N; ++i) {
            double acc = 0.0;
            for (int j = 0; j < N; ++j) acc += f[j] * std::cos(kPi * i * (j + 0.5) / N);
            c_[i] = 2.0 * acc / N;
        }
        check_error_ = 0.0;
        for (int j = 0; j + 1 < N; j += std::max(1, N / 32)) {
            const double p = mid + half * std::cos(kPi * (j + 1.0) / N);
            check_error_ = std::max(check_error_, std::abs((*this)(p) / direct(p) - 1.0));
        }
        if (check_error_ < 1e-10) return;
    }
    throw ConvergenceError("transit table: Chebyshev interpolation did not converge");
}

double transit_time(const MorseParams& P, double z_cut, double p, double energy_tolerance, double* max_drift) {
    const double m = P.m;
    const double E = p * p / (2.0 * m);
    const double p_in = -std::sqrt(2.0 * m * (E - potential(P, z_cut)));
    InsideResult r = integrate_inside(P, z_cut, E, 0.0, z_cut, p_in, energy_tolerance, nullptr, 0, nullptr,
                                      std::numeric_limits<double>::quiet_NaN(),
                                      std::numeric_limits<double>::infinity(), 1e-14);
    if (!r.exited) throw IntegrationError("transit: trajectory did not leave the interaction region");
    if (max_drift) *max_drift = std::max(*max_drift, r.max_drift);
    return r.t_exit;
}

double TransitTable::direct(double p) const { return transit_time(P_, z_cut_, p, tol_, &max_drift_); }

double TransitTable::operator()(double p) const {
    const double x = (2.0 * p - p_hi_ - p_lo_) / (p_hi_ - p_lo_);
    return boost::math::chebyshev_clenshaw_recurrence(c_.data(), c_.size(), x);
}

namespace {

struct EnsembleSetup {
    double z_cut;
    SampleStream stream;
    std::unique_ptr<TransitTable> table;
};

EnsembleSetup make_setup(const MorseParams& P, const CoherentState& s, const EnsembleConfig& cfg) {
    P.validate();
    s.validate();
    cfg.validate();
    EnsembleSetup st{resolve_z_cut(P, s, cfg), SampleStream(s, cfg, P.hbar), nullptr};
    if (cfg.transit == TransitMode::Tabulated) {
        const double sp = st.stream.sigma_p();
        const double lo = std::max(s.p_i - 10.0 * sp, 0.1 * s.p_i), hi = s.p_i + 10.0 * sp;
        st.table = std::make_unique<TransitTable>(P, st.z_cut, lo, hi, cfg.energy_tolerance);
    }
    return st;
}

/// Outgoing crossing of y >= z_cut from the table when applicable.
bool tabulated_crossing(const EnsembleSetup& st, const MorseParams& P, const PhaseSample& ps, double y,
                        CrossingRecord& c, double& t_in, double& t_exit) {
    if (!st.table || ps.q < st.z_cut || ps.p >= 0.0 || y < st.z_cut) return false;
    const double p = -ps.p;
    if (!st.table->contains(p)) return false;
    t_in = (ps.q - st.z_cut) * P.m / p;
    t_exit = t_in + (*st.table)(p);
    c = {true, t_exit + (y - st.z_cut) * P.m / p, p / P.m};
    return true;
}

} // namespace

std::vector<SpaceTimeDensity> density_grids(const MorseParams& P, const CoherentState& s,
                                            const EnsembleConfig& cfg,
                                            const std::vector<std::vector<double>>& z_axes,
                                            const std::vector<double>& t_axis, DensityNormalization norm) {
    EnsembleSetup st = make_setup(P, s, cfg);
    const std::size_t ng = z_axes.size(), nt = t_axis.size();
    for (std::size_t i = 1; i < nt; ++i)
        if (!(t_axis[i] > t_axis[i - 1])) throw ValidationError("density: t axis must increase");
    std::vector<double> dz(ng), e0(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        dz[g] = uniform_step(z_axes[g], "density z axis");
        e0[g] = z_axes[g].front() - 0.5 * dz[g];
    }
    const int threads = detail::resolve_threads(cfg.threads);
    const std::size_t n = static_cast<std::size_t>(cfg.n_traj);
    std::vector<std::vector<std::vector<std::uint32_t>>> hist(
        threads, std::vector<std::vector<std::uint32_t>>(ng));
    const double m = P.m, zc = st.z_cut;
    TrajectoryOptions topt;
    topt.z_cut = zc;
    topt.energy_tolerance = cfg.energy_tolerance;

    detail::parallel_for(static_cast<std::size_t>(threads), threads, [&](std::size_t w0, std::size_t w1) {
        for (std::size_t w = w0; w < w1; ++w) {
            auto& H = hist[w];
            for (std::size_t g = 0; g < ng; ++g) H[g].assign(z_axes[g].size() * nt, 0);
            std::vector<double> q(nt);
            const std::size_t b = n * w / threads, e = n * (w + 1) / threads;
            for (std::size_t i = b; i < e; ++i) {
                const PhaseSample ps = st.stream(i);
                CrossingRecord c;
                double t_in = 0.0, t_exit = 0.0;
                bool fast = tabulated_crossing(st, P, ps, zc, c, t_in, t_exit);
                if (fast) {
                    const double p = -ps.p;
                    const auto lo = std::upper_bound(t_axis.begin(), t_axis.end(), t_in) - t_axis.begin();
                    const auto hi = std::lower_bound(t_axis.begin(), t_axis.end(), t_exit) - t_axis.begin();
                    if (lo < hi) {
                        fast = false;
                    } else {
                        for (std::size_t it = 0; it < nt; ++it) {
                            const double t = t_axis[it];
                            q[it] = t <= t_in ? ps.q + ps.p * t / m : zc + p * (t - t_exit) / m;
                        }
                    }
                }
                if (!fast) q = evolve_trajectory(P, ps, t_axis, topt).positions;
                for (std::size_t g = 0; g < ng; ++g) {
                    const std::size_t nz = z_axes[g].size();
                    const double inv = 1.0 / dz[g];
                    auto& h = H[g];
                    for (std::size_t it = 0; it < nt; ++it) {
                        const double f = (q[it] - e0[g]) * inv;
                        if (f >= 0.0 && f < static_cast<double>(nz)) ++h[static_cast<std::size_t>(f) * nt + it];
                    }
                }
            }
        }
    });

    std::vector<SpaceTimeDensity> out(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        SpaceTimeDensity& d = out[g];
        d.z_axis = z_axes[g];
        d.t_axis = t_axis;
        d.provenance = Provenance::Wigner;
        const std::size_t nz = d.z_axis.size();
        std::vector<double> counts(nz * nt, 0.0);
        for (int w = 0; w < threads; ++w)
            for (std::size_t j = 0; j < nz * nt; ++j) counts[j] += hist[w][g][j];
        d.values = std::move(counts);
        normalize_counts(d, norm, cfg.n_traj);
    }
    return out;
}

void normalize_counts(SpaceTimeDensity& d, DensityNormalization norm, long long n_traj) {
    if (norm == DensityNormalization::Counts) return;
    const double dz = uniform_step(d.z_axis, "density z axis");
    const std::size_t nz = d.nz(), nt = d.nt();
    if (norm == DensityNormalization::Ensemble) {
        const double f = 1.0 / (static_cast<double>(n_traj) * dz);
        for (double& v : d.values) v *= f;
        return;
    }
    for (std::size_t it = 0; it < nt; ++it) {
        double tot = 0.0;
        for (std::size_t iz = 0; iz < nz; ++iz) tot += d.at(iz, it);
        if (tot > 0.0)
            for (std::size_t iz = 0; iz < nz; ++iz) d.at(iz, it) /= tot * dz;
    }
}

SpaceTimeDensity density_grid(const MorseParams& P, const CoherentState& s, const EnsembleConfig& cfg,
                              const std::vector<double>& z_axis, const std::vector<double>& t_axis,
                              DensityNormalization norm) {
    return std::move(density_grids(P, s, cfg, {z_axis}, t_axis, norm).front());
}

FlightTimeW mean_flight_time_w(const MorseParams& P, const CoherentState& s, const EnsembleConfig& cfg,
                               double y, double t_max) {
    EnsembleSetup st = make_setup(P, s, cfg);
    if (!(y > s.z_i)) throw ValidationError("flight time: y must exceed z_i");
    const std::size_t n = static_cast<std::size_t>(cfg.n_traj);
    std::size_t bs = (n + 255) / 256;
    bs += bs & 1;
    const std::size_t nb = (n + bs - 1) / bs;
    struct Block {
        long double s0 = 0, s1 = 0;
        long long nocross = 0, direct = 0;
        double drift = 0;
    };
    std::vector<Block> blocks(nb);
    TrajectoryOptions topt;
    topt.z_cut = st.z_cut;
    topt.energy_tolerance = cfg.energy_tolerance;
    topt.y = y;
    topt.t_max = t_max;
    std::atomic<std::size_t> next{0};
    const int threads = detail::resolve_threads(cfg.threads);
    detail::parallel_for(static_cast<std::size_t>(threads), threads, [&](std::size_t, std::size_t) {
        for (std::size_t bi; (bi = next.fetch_add(1)) < nb;) {
            Block& B = blocks[bi];
            const std::size_t e = std::min(n, (bi + 1) * bs);
            for (std::size_t i = bi * bs; i < e; ++i) {
                const PhaseSample ps = st.stream(i);
                CrossingRecord c;
                double t_in, t_exit;
                if (!tabulated_crossing(st, P, ps, y, c, t_in, t_exit)) {
                    TrajectoryResult r = evolve_trajectory(P, ps, {}, topt);
                    c = r.crossing;
                    ++B.direct;
                    B.drift = std::max(B.drift, r.max_drift);
                }
                if (!c.crossed || c.t_c > t_max) {
                    ++B.nocross;
                    continue;
                }
                const long double iv = ps.weight / std::abs(static_cast<long double>(c.v_c));
                B.s0 += iv;
                B.s1 += iv * c.t_c;
            }
        }
    });
    FlightTimeW r;
    r.n_traj = cfg.n_traj;
    r.z_cut = st.z_cut;
    long double S0 = 0, S1 = 0;
    for (const Block& B : blocks) {
        S0 += B.s0;
        S1 += B.s1;
        r.n_no_crossing += B.nocross;
        r.n_direct += B.direct;
        r.max_drift = std::max(r.max_drift, B.drift);
    }
    if (st.table) {
        r.table_nodes = st.table->nodes();
        r.table_error = st.table->check_error();
        r.max_drift = std::max(r.max_drift, st.table->max_drift());
    }
    if (static_cast<double>(r.n_no_crossing) >= 1e-6 * static_cast<double>(n))
        throw NoCrossingError("flight time: " + std::to_string(r.n_no_crossing) +
                              " trajectories never reach y");
    r.mean = static_cast<double>(S1 / S0);
    if (nb > 1) {
        long double acc = 0, mean_j = 0;
        std::vector<long double> rj(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            rj[b] = (S1 - blocks[b].s1) / (S0 - blocks[b].s0);
            mean_j += rj[b];
        }
        mean_j /= nb;
        for (std::size_t b = 0; b < nb; ++b) acc += (rj[b] - mean_j) * (rj[b] - mean_j);
        r.stderr_ = static_cast<double>(std::sqrt(acc * (nb - 1) / nb));
    }
    return r;
}

double mean_flight_time_w_histogram(const MorseParams& P, const CoherentState& s, const EnsembleConfig& cfg,
                                    double y, const std::vector<double>& t_axis, double dz) {
    EnsembleSetup st = make_setup(P, s, cfg);
    const double dt = uniform_step(t_axis, "histogram t axis");
    if (!(dz > 0.0) || y - 0.5 * dz < st.z_cut)
        throw ValidationError("histogram estimator: bin must lie outside the interaction region");
    const std::size_t n = static_cast<std::size_t>(cfg.n_traj), nt = t_axis.size();
    const int threads = detail::resolve_threads(cfg.threads);
    std::vector<std::vector<double>> C(threads, std::vector<double>(nt, 0.0));
    TrajectoryOptions topt;
    topt.z_cut = st.z_cut;
    topt.energy_tolerance = cfg.energy_tolerance;
    topt.y = y;
    detail::parallel_for(static_cast<std::size_t>(threads), threads, [&](std::size_t w0, std::size_t w1) {
        for (std::size_t w = w0; w < w1; ++w) {
            const std::size_t b = n * w / threads, e = n * (w + 1) / threads;
            for (std::size_t i = b; i < e; ++i) {
                const PhaseSample ps = st.stream(i);
                CrossingRecord c;
                double t_in, t_exit;
                if (!tabulated_crossing(st, P, ps, y, c, t_in, t_exit)) c = evolve_trajectory(P, ps, {}, topt).crossing;
                if (!c.crossed) continue;
                const double half = 0.5 * dz / std::abs(c.v_c);
                const double a = (c.t_c - half - t_axis.front()) / dt, bnd = (c.t_c + half - t_axis.front()) / dt;
                const long lo = std::max(0L, static_cast<long>(std::ceil(a)));
                const long hi = std::min(static_cast<long>(nt) - 1, static_cast<long>(std::ceil(bnd)) - 1);
                for (long it = lo; it <= hi; ++it) C[w][it] += ps.weight;
            }
        }
    });
    long double s0 = 0, s1 = 0;
    for (std::size_t it = 0; it < nt; ++it) {
        double c = 0.0;
        for (int w = 0; w < threads; ++w) c += C[w][it];
        s0 += c;
        s1 += c * static_cast<long double>(t_axis[it]);
    }
    if (!(s0 > 0)) throw WindowError("histogram estimator: no counts at y");
    return static_cast<double>(s1 / s0);
}

double free_flight_time(const MorseParams& P, const CoherentState& s, double y) {
    P.validate();
    s.validate();
    return P.m * (y + s.z_i + 2.0 * std::abs(turning_point(P, s.energy(P.m)))) / s.p_i;
}

} // namespace qthr
