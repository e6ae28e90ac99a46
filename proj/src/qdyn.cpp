#include "qthr/qdyn.hpp"

#include "qthr/detail/parallel.hpp"
#include "qthr/errors.hpp"

#include <Eigen/Dense>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <random>
#include <set>

namespace qthr {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr long double kTwoPiL = 6.283185307179586476925286766559005768L;

static_assert(std::endian::native == std::endian::little, "QTRD I/O assumes a little-endian host");

void check_asymptotic(const MorseParams& P, const CoherentState& s) {
    const double z = P.z0 + 10.0 * P.d;
    const double dens = s.density(z);
    if (!(s.z_i > z) || dens > 1e-12)
        throw AsymptoticsViolation("coherent state is not localized in the asymptotic region "
                                   "(|Phi|^2 at z0+10d = " + std::to_string(dens) + ")");
}

/// Reduced phase hbar k^2 t / 2m modulo 2 pi, evaluated in extended precision.
inline double reduced_phase(long double alpha, double t) {
    long double th = alpha * static_cast<long double>(t);
    th -= kTwoPiL * std::floor(th / kTwoPiL);
    return static_cast<double>(th);
}

/// Scattering states for signed k: psi_{-k} = conj(R(k)) psi_k, psi_0 = 0.
struct SignedState {
    std::unique_ptr<ScatteringState> st;
    cplx factor{1.0, 0.0};
    SignedState(const MorseParams& P, double k) {
        if (k == 0.0) {
            factor = 0.0;
            return;
        }
        st = std::make_unique<ScatteringState>(P, std::abs(k));
        if (k < 0.0) factor = std::conj(st->R());
    }
    cplx operator()(double z) const { return st ? factor * (*st)(z) : cplx(0.0, 0.0); }
};

/// Incoming-wave expansion coefficient times the quadrature weight.
cplx packet_coefficient(const MorseParams& P, const CoherentState& s, double k, double w) {
    const double pk = s.p_i / P.hbar - k;
    return w * std::pow(kPi * s.gamma, -0.25) *
           std::polar(std::exp(-pk * pk / (2.0 * s.gamma)), k * s.z_i);
}

} // namespace

void CoherentState::validate() const {
    if (!std::isfinite(z_i)) throw ValidationError("state: z_i must be finite");
    if (!(p_i > 0.0) || !std::isfinite(p_i)) throw ValidationError("state: p_i must be positive");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("state: gamma must be positive");
}

cplx CoherentState::amplitude(double z, double hbar) const {
    const double dz = z - z_i;
    return std::pow(gamma / kPi, 0.25) *
           std::polar(std::exp(-0.5 * gamma * dz * dz), p_i * (z_i - z) / hbar);
}

double CoherentState::density(double z) const {
    const double dz = z - z_i;
    return std::sqrt(gamma / kPi) * std::exp(-gamma * dz * dz);
}

KGrid KGrid::for_state(const MorseParams& P, const CoherentState& s, long n, KRule rule) {
    const double c = s.p_i / P.hbar, h = 7.0 * std::sqrt(s.gamma);
    return {c - h, c + h, n, rule};
}

void KGrid::validate() const {
    if (!(k_max > k_min) || !std::isfinite(k_min) || !std::isfinite(k_max))
        throw ValidationError("k grid: need k_min < k_max");
    if (n < 2) throw ValidationError("k grid: need n >= 2");
}

void KGrid::nodes(std::vector<double>& k, std::vector<double>& w) const {
    validate();
    k.resize(n);
    w.resize(n);
    if (rule == KRule::Trapezoid) {
        const double h = (k_max - k_min) / static_cast<double>(n - 1);
        for (long i = 0; i < n; ++i) {
            k[i] = k_min + h * static_cast<double>(i);
            w[i] = (i == 0 || i == n - 1) ? 0.5 * h : h;
        }
        return;
    }
    gsl_integration_glfixed_table* tab = gsl_integration_glfixed_table_alloc(static_cast<size_t>(n));
    if (!tab) throw NumericalError("k grid: cannot build Gauss-Legendre table");
    for (long i = 0; i < n; ++i)
        gsl_integration_glfixed_point(k_min, k_max, static_cast<size_t>(i), &k[i], &w[i], tab);
    gsl_integration_glfixed_table_free(tab);
    std::vector<std::size_t> idx(n);
    for (long i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return k[a] < k[b]; });
    std::vector<double> ks(n), ws(n);
    for (long i = 0; i < n; ++i) {
        ks[i] = k[idx[i]];
        ws[i] = w[idx[i]];
    }
    k.swap(ks);
    w.swap(ws);
}

double SpaceTimeDensity::max_value() const {
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

void SpaceTimeDensity::validate() const {
    if (values.size() != nz() * nt()) throw ValidationError("density: shape mismatch");
    auto inc = [](const std::vector<double>& a) {
        for (std::size_t i = 1; i < a.size(); ++i)
            if (!(a[i] > a[i - 1])) return false;
        return true;
    };
    if (!inc(z_axis) || !inc(t_axis)) throw ValidationError("density: axes must increase strictly");
    for (double v : values)
        if (!(v >= 0.0)) throw ValidationError("density: negative or NaN value");
}

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = a;
        return v;
    }
    for (std::size_t i = 0; i < n; ++i)
        v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

void write_density_csv(const SpaceTimeDensity& d, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ValidationError("cannot write " + path);
    std::fputs("z\\t", f);
    for (double t : d.t_axis) std::fprintf(f, ",%.9g", t);
    std::fputc('\n', f);
    for (std::size_t i = 0; i < d.nz(); ++i) {
        std::fprintf(f, "%.9g", d.z_axis[i]);
        for (std::size_t j = 0; j < d.nt(); ++j) std::fprintf(f, ",%.9g", d.at(i, j));
        std::fputc('\n', f);
    }
    std::fclose(f);
}

void write_density_qtrd(const SpaceTimeDensity& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    const std::uint32_t version = 1;
    const std::uint64_t nz = d.nz(), nt = d.nt();
    out.write("QTRD", 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&nz), 8);
    out.write(reinterpret_cast<const char*>(&nt), 8);
    out.write(reinterpret_cast<const char*>(d.z_axis.data()), 8 * nz);
    out.write(reinterpret_cast<const char*>(d.t_axis.data()), 8 * nt);
    out.write(reinterpret_cast<const char*>(d.values.data()), 8 * nz * nt);
    if (!out) throw ValidationError("write failed: " + path);
}

SpaceTimeDensity read_density_qtrd(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path);
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t nz = 0, nt = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&nz), 8);
    in.read(reinterpret_cast<char*>(&nt), 8);
    if (!in || std::memcmp(magic, "QTRD", 4) != 0 || version != 1)
        throw ValidationError("not a QTRD v1 file: " + path);
    SpaceTimeDensity d;
    d.z_axis.resize(nz);
    d.t_axis.resize(nt);
    d.values.resize(nz * nt);
    in.read(reinterpret_cast<char*>(d.z_axis.data()), 8 * nz);
    in.read(reinterpret_cast<char*>(d.t_axis.data()), 8 * nt);
    in.read(reinterpret_cast<char*>(d.values.data()), 8 * nz * nt);
    if (!in) throw ValidationError("truncated QTRD file: " + path);
    return d;
}

cplx overlap_k(const MorseParams& P, const CoherentState& s, double k) {
    P.validate();
    s.validate();
    check_asymptotic(P, s);
    const double pk = s.p_i / P.hbar;
    const cplx R = reflection_amplitude(P, std::abs(k)).amplitude;
    const cplx Rk = k < 0.0 ? std::conj(R) : R;
    const double n = std::pow(kPi * s.gamma, -0.25);
    return n * (std::polar(std::exp(-(pk - k) * (pk - k) / (2.0 * s.gamma)), k * s.z_i) +
                std::conj(Rk) * std::polar(std::exp(-(pk + k) * (pk + k) / (2.0 * s.gamma)), -k * s.z_i));
}

PropagateResult propagate(const MorseParams& P, const CoherentState& s, const KGrid& kg,
                          const std::vector<double>& z_axis, const std::vector<double>& t_axis,
                          const PropagateOptions& opt) {
    P.validate();
    s.validate();
    check_asymptotic(P, s);
    std::vector<double> ks, ws;
    kg.nodes(ks, ws);
    const std::size_t nz = z_axis.size(), nt = t_axis.size(), nk = ks.size();
    if (nz == 0 || nt == 0) throw ValidationError("propagate: empty axis");
    const int threads = detail::resolve_threads(opt.threads);
    const long double hk = static_cast<long double>(P.hbar) / (2.0L * static_cast<long double>(P.m));

    std::vector<cplx> coef(nk);
    for (std::size_t j = 0; j < nk; ++j) coef[j] = packet_coefficient(P, s, ks[j], ws[j]);

    PropagateResult res;
    if (opt.self_test) {
        const double sig = 1.0 / std::sqrt(2.0 * s.gamma);
        const std::vector<double> zt{s.z_i - 2 * sig, s.z_i - sig, s.z_i, s.z_i + sig, s.z_i + 2 * sig};
        std::vector<cplx> acc(zt.size());
        for (std::size_t j = 0; j < nk; ++j) {
            SignedState st(P, ks[j]);
            for (std::size_t i = 0; i < zt.size(); ++i) acc[i] += coef[j] * st(zt[i]);
        }
        const double peak = s.density(s.z_i);
        for (std::size_t i = 0; i < zt.size(); ++i)
            res.self_test_error = std::max(res.self_test_error, std::abs(std::norm(acc[i]) - s.density(zt[i])) / peak);
        if (!(res.self_test_error <= 1e-6))
            throw WindowError("propagate: t=0 self-test failed, relative error " +
                              std::to_string(res.self_test_error));
    }

    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(nz, nt);
    const std::size_t chunk = static_cast<std::size_t>(std::max(1L, opt.k_chunk));
    Eigen::MatrixXcd B, Pm;
    for (std::size_t j0 = 0; j0 < nk; j0 += chunk) {
        const std::size_t kc = std::min(chunk, nk - j0);
        B.resize(nz, kc);
        Pm.resize(kc, nt);
        detail::parallel_for(kc, threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t jj = b; jj < e; ++jj) {
                const std::size_t j = j0 + jj;
                SignedState st(P, ks[j]);
                for (std::size_t iz = 0; iz < nz; ++iz) B(iz, jj) = coef[j] * st(z_axis[iz]);
                const long double alpha = hk * static_cast<long double>(ks[j]) * ks[j];
                for (std::size_t it = 0; it < nt; ++it)
                    Pm(jj, it) = std::polar(1.0, -reduced_phase(alpha, t_axis[it]));
            }
        });
        detail::parallel_for(nt, threads, [&](std::size_t b, std::size_t e) {
            A.middleCols(b, e - b).noalias() += B * Pm.middleCols(b, e - b);
        });
    }

    SpaceTimeDensity& d = res.density;
    d.z_axis = z_axis;
    d.t_axis = t_axis;
    d.provenance = Provenance::Quantum;
    d.values.resize(nz * nt);
    for (std::size_t iz = 0; iz < nz; ++iz)
        for (std::size_t it = 0; it < nt; ++it) d.values[iz * nt + it] = std::norm(A(iz, it));
    if (opt.keep_amplitude) {
        res.amplitude.resize(nz * nt);
        for (std::size_t iz = 0; iz < nz; ++iz)
            for (std::size_t it = 0; it < nt; ++it) res.amplitude[iz * nt + it] = A(iz, it);
    }
    A.resize(0, 0);
    B.resize(0, 0);
    Pm.resize(0, 0);

    if (opt.quadrature_check && opt.check_cells > 0) {
        std::mt19937_64 rng(opt.seed);
        std::uniform_int_distribution<std::size_t> uz(0, nz - 1), ut(0, nt - 1);
        std::vector<std::pair<std::size_t, std::size_t>> cells(opt.check_cells);
        for (auto& c : cells) c = {uz(rng), ut(rng)};
        std::set<std::size_t> zset;
        for (auto& c : cells) zset.insert(c.first);
        const std::vector<std::size_t> zs(zset.begin(), zset.end());
        KGrid kg2 = kg;
        kg2.n = 2 * kg.n;
        std::vector<double> k2, w2;
        kg2.nodes(k2, w2);
        std::vector<cplx> acc(cells.size());
        std::vector<cplx> psi(zs.size());
        for (std::size_t j = 0; j < k2.size(); ++j) {
            SignedState st(P, k2[j]);
            const cplx c = packet_coefficient(P, s, k2[j], w2[j]);
            for (std::size_t i = 0; i < zs.size(); ++i) psi[i] = c * st(z_axis[zs[i]]);
            const long double alpha = hk * static_cast<long double>(k2[j]) * k2[j];
            for (std::size_t ci = 0; ci < cells.size(); ++ci) {
                const std::size_t pos = std::lower_bound(zs.begin(), zs.end(), cells[ci].first) - zs.begin();
                acc[ci] += psi[pos] * std::polar(1.0, -reduced_phase(alpha, t_axis[cells[ci].second]));
            }
        }
        const double floor = 1e-6 * d.max_value();
        for (std::size_t ci = 0; ci < cells.size(); ++ci) {
            const double v1 = d.at(cells[ci].first, cells[ci].second);
            const double v2 = std::norm(acc[ci]);
            res.quadrature_change = std::max(res.quadrature_change, std::abs(v2 - v1) / std::max(v1, floor));
        }
        res.quadrature_warning = res.quadrature_change > 1e-6;
    }
    return res;
}

std::vector<double> correlation_series(const MorseParams& P, const CoherentState& s,
                                       const KGrid& kg, double y, const std::vector<double>& t,
                                       int threads) {
    P.validate();
    s.validate();
    check_asymptotic(P, s);
    std::vector<double> ks, ws;
    kg.nodes(ks, ws);
    const std::size_t nk = ks.size();
    std::vector<cplx> c(nk);
    std::vector<long double> alpha(nk);
    const long double hk = static_cast<long double>(P.hbar) / (2.0L * static_cast<long double>(P.m));
    detail::parallel_for(nk, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            c[j] = packet_coefficient(P, s, ks[j], ws[j]) * SignedState(P, ks[j])(y);
            alpha[j] = hk * static_cast<long double>(ks[j]) * ks[j];
        }
    });
    std::vector<double> out(t.size());
    detail::parallel_for(t.size(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t it = b; it < e; ++it) {
            cplx a(0.0, 0.0);
            for (std::size_t j = 0; j < nk; ++j) a += c[j] * std::polar(1.0, -reduced_phase(alpha[j], t[it]));
            out[it] = std::norm(a);
        }
    });
    return out;
}

double correlation_at(const MorseParams& P, const CoherentState& s, double y, double t) {
    return correlation_series(P, s, KGrid::for_state(P, s), y, {t}, 1)[0];
}

FlightTimeQM mean_flight_time_qm(const MorseParams& P, const CoherentState& s, double y,
                                 double t_begin, double t_end, const KGrid& kg,
                                 const FlightTimeOptions& opt) {
    if (!(t_end > t_begin)) throw ValidationError("flight time: empty t window");
    if (opt.n_t < 10) throw ValidationError("flight time: need at least 10 time points");
    const double dt = (t_end - t_begin) / static_cast<double>(opt.n_t - 1);
    std::vector<double> t = linspace(t_begin, t_end, opt.n_t);
    std::vector<double> C = correlation_series(P, s, kg, y, t, opt.threads);
    FlightTimeQM r;
    r.t_begin = t_begin;
    for (;;) {
        double norm = 0.0, m1 = 0.0, tail = 0.0;
        const std::size_t n = t.size();
        const std::size_t tail_start = n - std::max<std::size_t>(2, n / 10);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double a = 0.5 * dt * (C[i] + C[i + 1]);
            norm += a;
            m1 += 0.5 * dt * (t[i] * C[i] + t[i + 1] * C[i + 1]);
            if (i >= tail_start) tail += a;
        }
        r.normalization = norm;
        r.mean = m1 / norm;
        r.t_end = t.back();
        r.tail_fraction = tail / norm;
        const std::size_t ipk = std::max_element(C.begin(), C.end()) - C.begin();
        r.peak_time = t[ipk];
        if (!(norm > 0.0)) throw WindowError("flight time: correlation vanishes on the window");
        if (r.tail_fraction < 1e-6) break;
        if (r.extensions >= opt.max_extensions) {
            if (C.back() > 1e-8 * C[ipk])
                throw WindowError("flight time: correlation has not decayed at t=" + std::to_string(t.back()));
            break;
        }
        const std::size_t add = std::max<std::size_t>(n / 2, 10);
        std::vector<double> tn(add);
        for (std::size_t i = 0; i < add; ++i) tn[i] = t.back() + dt * static_cast<double>(i + 1);
        const std::vector<double> Cn = correlation_series(P, s, kg, y, tn, opt.threads);
        t.insert(t.end(), tn.begin(), tn.end());
        C.insert(C.end(), Cn.begin(), Cn.end());
        ++r.extensions;
    }
    return r;
}

} // namespace qthr
