#include "qthr/experiments.hpp"

#include "qthr/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace qthr {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt9(double v) { return format9(v); }

Check rel_check(std::string name, double ref, double got, double tol) {
    const double dev = std::abs(got / ref - 1.0);
    return {std::move(name), ref, got, dev, tol, dev <= tol};
}

Check abs_check(std::string name, double ref, double got, double tol) {
    const double dev = std::abs(got - ref);
    return {std::move(name), ref, got, dev, tol, dev <= tol};
}

// got < bound
Check upper_check(std::string name, double got, double bound) {
    return {std::move(name), bound, got, got, bound, got < bound};
}

// got > bound
Check lower_check(std::string name, double got, double bound) {
    return {std::move(name), bound, got, got, bound, got > bound};
}

Check flag_check(std::string name, bool ok) { return {std::move(name), 1.0, ok ? 1.0 : 0.0, ok ? 0.0 : 1.0, 0.0, ok}; }

// ratio within a factor f of 1
Check factor_check(std::string name, double ratio, double f) {
    const double dev = std::abs(std::log(ratio)) / std::log(f);
    return {std::move(name), 1.0, ratio, dev, 1.0, dev <= 1.0};
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& cols) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write " + path.string());
    for (std::size_t j = 0; j < header.size(); ++j) f << (j ? "," : "") << header[j];
    f << '\n';
    const std::size_t n = cols.empty() ? 0 : cols.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) f << (j ? "," : "") << fmt9(cols[j][i]);
        f << '\n';
    }
}

std::size_t nearest(const std::vector<double>& a, double x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.size(); ++i)
        if (std::abs(a[i] - x) < std::abs(a[best] - x)) best = i;
    return best;
}

std::vector<double> slice_t(const SpaceTimeDensity& d, std::size_t it) {
    std::vector<double> f(d.nz());
    for (std::size_t iz = 0; iz < d.nz(); ++iz) f[iz] = d.at(iz, it);
    return f;
}

struct Run {
    Summary& sum;
    fs::path dir;
    const Overrides& ov;
    MorseParams P;

    void config(const std::string& k, const std::string& v) { sum.config.emplace_back(k, v); }
    void config(const std::string& k, double v) { config(k, fmt9(v)); }
    void check(Check c) { sum.checks.push_back(std::move(c)); }
    long grid_n() const { return ov.grid_points.value_or(2000); }
    long k_n() const { return ov.k_points.value_or(50000); }
    long long n_traj() const { return ov.n_traj.value_or(10'000'000); }
    std::uint64_t seed() const { return ov.seed.value_or(1); }

    void morse_config() {
        config("morse.V", P.V);
        config("morse.d", P.d);
        config("morse.z0", P.z0);
        config("morse.m", P.m);
        config("morse.hbar", P.hbar);
    }

    void fig1();
    void fig2();
    void density(Preset id);
    void table1();
};

void Run::fig1() {
    morse_config();
    auto R = [&](double k) {
        const cplx r = reflection_amplitude(P, std::abs(k)).amplitude;
        return k < 0.0 ? std::conj(r) : r;
    };
    auto sweep = [&](const std::vector<double>& k, const char* name) {
        std::vector<double> re(k.size()), im(k.size()), ab(k.size());
        for (std::size_t i = 0; i < k.size(); ++i) {
            const cplx r = R(k[i]);
            re[i] = r.real();
            im[i] = r.imag();
            ab[i] = std::abs(r);
        }
        write_csv(dir / name, {"k", "re_R", "im_R", "abs_R"}, {k, re, im, ab});
        return im;
    };
    const long n = grid_n() + 1;
    config("fig1.k_range", "[-0.5,0.5]");
    config("fig1.k_points", static_cast<double>(n));
    sweep(linspace(-0.5, 0.5, n), "fig1.csv");
    const std::vector<double> kz = linspace(-0.02, 0.02, 401);
    const std::vector<double> imz = sweep(kz, "fig1_zoom.csv");

    check(rel_check("threshold_slope", -17.626, threshold_slope(P), 0.005));
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < kz.size(); ++i)
        if (std::abs(kz[i]) <= 1e-3) {
            sxy += kz[i] * imz[i];
            sxx += kz[i] * kz[i];
        }
    check(rel_check("threshold_slope_fit", -17.626, sxy / sxx, 0.005));
    check(rel_check("threshold_slope_closed_form", -17.626, threshold_slope_closed_form(P), 0.005));

    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double k = 1e-6 * std::pow(1e7, i / 199.0);
        worst = std::max(worst, std::abs(std::abs(R(k)) - 1.0));
    }
    check(upper_check("unitarity_max_dev", worst, 1e-12));
    // linear to 10 percent, against the quoted window edge k ~ 1e-2 (half a decade either way)
    const double w = threshold_linearity_window(P, 0.01);
    check({"linearity_window_k", 1e-2, w, std::abs(std::log10(w / 1e-2)), 0.5, std::abs(std::log10(w / 1e-2)) <= 0.5});
}

void Run::fig2() {
    morse_config();
    const std::vector<double> E{5e-5, 5e-6, 5e-7, 5e-8, 5e-9};
    double z_lo = -1e300;
    for (double e : E) z_lo = std::max(z_lo, turning_point(P, e));
    const std::vector<double> z = linspace(z_lo + 1e-3 * P.d, P.z0 + 50.0 * P.d, grid_n());
    std::vector<std::vector<double>> cols{z};
    std::vector<std::string> header{"z"};
    std::vector<double> zb, qm;
    for (double e : E) {
        std::vector<double> q(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) q[i] = std::abs(badlands(P, z[i], e));
        cols.push_back(std::move(q));
        header.push_back("absQ_E" + fmt9(e));
        const BadlandsPeak pk = badlands_peak(P, e);
        zb.push_back(pk.z_bf);
        qm.push_back(pk.q_max);
    }
    write_csv(dir / "fig2.csv", header, cols);
    write_csv(dir / "fig2_peaks.csv", {"E", "z_bf", "q_max"}, {E, zb, qm});
    config("fig2.energies", "5e-5,5e-6,5e-7,5e-8,5e-9");
    check(abs_check("z_bf_E5e-5", 11.5, zb.front(), 0.3));
    check(abs_check("z_bf_E5e-9", 20.7, zb.back(), 0.3));
    bool mono_z = true, mono_q = true;
    for (std::size_t i = 1; i < E.size(); ++i) {
        mono_z = mono_z && zb[i] > zb[i - 1];
        mono_q = mono_q && qm[i] > qm[i - 1];
    }
    check(flag_check("z_bf_increases_as_E_decreases", mono_z));
    check(flag_check("q_max_increases_as_E_decreases", mono_q));
}

void Run::density(Preset id) {
    morse_config();
    const CoherentState s = figure_state(id);
    const double E = s.energy(P.m), k_i = s.p_i / P.hbar;
    const double z_tp = turning_point(P, E);
    const double t_free = free_flight_time(P, s, 2.0 * s.z_i);
    const long n = grid_n();
    const std::vector<double> t = linspace(0.0, 2.2 * t_free, n);
    const std::vector<double> z_main = linspace(z_tp - 2.0 * P.d, 6.0 * s.z_i, n);
    const std::vector<double> z_zoom = linspace(z_tp - 2.0 * P.d, z_tp + 3.0 * kPi / k_i, n);
    const KGrid kg = KGrid::for_state(P, s, k_n());
    config("state.z_i", s.z_i);
    config("state.p_i", s.p_i);
    config("state.gamma", s.gamma);
    config("grid.nz", static_cast<double>(n));
    config("grid.nt", static_cast<double>(n));
    config("grid.t_max", t.back());
    config("grid.t_max_rule", "2.2*t_free");
    config("grid.z_main", "[" + fmt9(z_main.front()) + "," + fmt9(z_main.back()) + "]");
    config("grid.z_zoom", "[" + fmt9(z_zoom.front()) + "," + fmt9(z_zoom.back()) + "]");
    config("kgrid.n", static_cast<double>(kg.n));
    config("kgrid.range", "[" + fmt9(kg.k_min) + "," + fmt9(kg.k_max) + "]");
    config("ensemble.n_traj", static_cast<double>(n_traj()));
    config("ensemble.seed", std::to_string(seed()));

    PropagateOptions po;
    po.threads = ov.threads;
    po.seed = seed();
    const PropagateResult qm = propagate(P, s, kg, z_main, t, po);
    write_density_qtrd(qm.density, (dir / "density.qtrd").string());
    const PropagateResult qz = propagate(P, s, kg, z_zoom, t, po);
    write_density_qtrd(qz.density, (dir / "density_zoom.qtrd").string());
    check(upper_check("qm_self_test_error", std::max(qm.self_test_error, qz.self_test_error), 1e-6));
    check(upper_check("qm_quadrature_change", std::max(qm.quadrature_change, qz.quadrature_change), 1e-6));
    const double qm_max = std::max(qm.density.max_value(), qz.density.max_value());

    EnsembleConfig cfg;
    cfg.n_traj = n_traj();
    cfg.seed = seed();
    cfg.threads = ov.threads;
    double z_bf = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> z_fine;
    if (id != Preset::Fig3) {
        z_bf = badlands_peak(P, E).z_bf;
        z_fine = {z_bf - P.d, z_bf, z_bf + P.d};
    } else {
        z_fine = {z_tp - P.d, z_tp, z_tp + P.d};
    }
    std::vector<SpaceTimeDensity> w =
        density_grids(P, s, cfg, {z_main, z_zoom, z_fine}, t, DensityNormalization::Counts);
    normalize_counts(w[0], DensityNormalization::PerSlice, cfg.n_traj);
    normalize_counts(w[1], DensityNormalization::PerSlice, cfg.n_traj);
    write_density_qtrd(w[0], (dir / "density_w.qtrd").string());
    write_density_qtrd(w[1], (dir / "density_w_zoom.qtrd").string());

    const double t_bounce = P.m * (s.z_i + std::abs(z_tp)) / s.p_i;
    const std::size_t ib = nearest(t, t_bounce);
    const std::vector<double> fq = slice_t(qz.density, ib), fw = slice_t(w[1], ib);
    write_csv(dir / "profile.csv", {"z", "qm", "wigner"}, {z_zoom, fq, fw});
    std::vector<std::string> mk{"z0", "z_tp", "t_free", "t_max", "t_bounce_slice"};
    std::vector<double> mv{P.z0, z_tp, t_free, t.back(), t[ib]};
    if (id != Preset::Fig3) {
        mk.push_back("z_bf");
        mv.push_back(z_bf);
    }
    {
        std::ofstream f(dir / "markers.csv");
        f << "name,value\n";
        for (std::size_t i = 0; i < mk.size(); ++i) f << mk[i] << ',' << fmt9(mv[i]) << '\n';
    }

    if (id == Preset::Fig3) {
        double pen = 0.0;
        for (std::size_t iz = 0; iz < z_zoom.size() && z_zoom[iz] < z_tp; ++iz) pen = std::max(pen, fq[iz]);
        check(lower_check("qm_penetration_ratio", pen / qm_max, 1e-6));
        check(lower_check("qm_interference_maxima", profile_contrast(fq).n_contrasted, 4.5));
        check(upper_check("w_contrast", profile_contrast(fw).max_contrast, 0.1));
        // time-integrated Wigner counts peak at the turning point
        std::vector<double> acc(z_zoom.size(), 0.0);
        for (std::size_t iz = 0; iz < z_zoom.size(); ++iz)
            for (std::size_t it = 0; it < t.size(); ++it) acc[iz] += w[1].at(iz, it);
        const std::size_t ip = std::max_element(acc.begin(), acc.end()) - acc.begin();
        check(abs_check("w_buildup_z", z_tp, z_zoom[ip], 0.25 * P.d));
        return;
    }

    // quantum density at z_BF over the full t axis
    const PropagateResult col = propagate(P, s, kg, {z_bf}, t, {.threads = ov.threads, .self_test = false,
                                                                  .quadrature_check = false});
    double col_max = 0.0;
    for (double v : col.density.values) col_max = std::max(col_max, v);
    check(upper_check("qm_z_bf_ratio", col_max / qm_max, 1e-6));

    // first interference maximum at t = z_i/p_i (1e10 for the lowest energy)
    const double t_first = P.m * s.z_i / s.p_i;
    const PropagateResult sl = propagate(P, s, kg, z_zoom, {t_first}, {.threads = ov.threads,
                                                                       .self_test = false,
                                                                       .quadrature_check = false});
    const std::vector<double>& f = sl.density.values;
    double z_first = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 1; i + 1 < f.size(); ++i)
        if (z_zoom[i] > z_tp && f[i] > f[i - 1] && f[i] >= f[i + 1]) {
            z_first = z_zoom[i];
            break;
        }
    write_csv(dir / "first_max_slice.csv", {"z", "qm"}, {z_zoom, f});
    config("first_max.t", t_first);
    check(rel_check("qm_first_max_z", z_tp + kPi / (2.0 * k_i), z_first, 0.05));

    // Wigner: time-integrated counts in the z_BF bin against its neighbours
    double c[3] = {0, 0, 0};
    for (int j = 0; j < 3; ++j)
        for (std::size_t it = 0; it < t.size(); ++it) c[j] += w[2].at(j, it);
    config("w_z_bf_bins.width", P.d);
    check(factor_check("w_z_bf_vs_inner_bin", c[1] / c[0], 2.0));
    check(factor_check("w_z_bf_vs_outer_bin", c[1] / c[2], 2.0));
}

void Run::table1() {
    morse_config();
    std::vector<int> rows = ov.rows;
    if (rows.empty()) rows = {1, 2, 3, 4, 5};
    const auto& ref = table1_reference();
    EnsembleConfig cfg;
    cfg.n_traj = n_traj();
    cfg.seed = seed();
    cfg.threads = ov.threads;
    config("ensemble.n_traj", static_cast<double>(cfg.n_traj));
    config("ensemble.seed", std::to_string(cfg.seed));
    config("kgrid.n", static_cast<double>(k_n()));
    config("flight.y", "2*z_i");
    config("flight.t_window", "[0,2*t_free] extended until the tail share < 1e-6");
    FlightTimeOptions fo;
    fo.threads = ov.threads;
    for (int r : rows) {
        if (r < 1 || r > 5) throw ValidationError("rows: Table1 row must be 1..5");
        const TableRow& T = ref[r - 1];
        const CoherentState s{T.z_i, T.p_i, T.gamma};
        const std::string pre = "row" + std::to_string(r) + ".";
        FlightTimeReport rep;
        rep.row = r;
        rep.E = T.E;
        rep.p_i = T.p_i;
        rep.z_i = T.z_i;
        rep.gamma = T.gamma;
        const double y = 2.0 * s.z_i;
        rep.z_tp = turning_point(P, T.E);
        check(abs_check(pre + "z_tp", T.z_tp, rep.z_tp, 1e-6));
        rep.t_free = free_flight_time(P, s, y);
        // half a unit in the 8th significant digit
        const double ulp8 = 0.5 * std::pow(10.0, std::floor(std::log10(T.t_free)) - 7);
        check(abs_check(pre + "t_free", T.t_free, rep.t_free, ulp8));
        const FlightTimeQM q = mean_flight_time_qm(P, s, y, 0.0, 2.0 * rep.t_free, KGrid::for_state(P, s, k_n()), fo);
        rep.t_qm = q.mean;
        check(rel_check(pre + "t_qm", T.t_qm, q.mean, 0.005));
        config(pre + "t_qm.window_end", q.t_end);
        if (ov.k_doubling) {
            const FlightTimeQM q2 =
                mean_flight_time_qm(P, s, y, 0.0, q.t_end, KGrid::for_state(P, s, 2 * k_n()), fo);
            check(upper_check(pre + "t_qm.k_doubling_change", std::abs(q2.mean / q.mean - 1.0), 1e-4));
        }
        const FlightTimeW fw = mean_flight_time_w(P, s, cfg, y);
        rep.t_w = fw.mean;
        rep.t_w_stderr = fw.stderr_;
        check(rel_check(pre + "t_w", T.t_w, fw.mean, std::max(0.005, 5.0 * fw.stderr_ / T.t_w)));
        check(upper_check(pre + "t_w.max_energy_drift", fw.max_drift, cfg.energy_tolerance));
        config(pre + "t_w.stderr", fw.stderr_);
        config(pre + "t_w.z_cut", fw.z_cut);
        check(flag_check(pre + "ordering_free_w_qm", rep.t_free < rep.t_w && rep.t_w < rep.t_qm));
        sum.rows.push_back(rep);
    }
    const fs::path csv = dir / "table1.csv";
    fs::remove(csv);
    append_table1_csv(sum.rows, csv.string());
}

} // namespace

std::string format9(double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.9g", v);
    return b;
}

std::string preset_name(Preset p) {
    switch (p) {
    case Preset::Fig1: return "Fig1";
    case Preset::Fig2: return "Fig2";
    case Preset::Fig3: return "Fig3";
    case Preset::Fig4: return "Fig4";
    case Preset::Fig5: return "Fig5";
    case Preset::Table1: return "Table1";
    }
    return "?";
}

Preset parse_preset(const std::string& name) {
    for (Preset p : all_presets())
        if (preset_name(p) == name) return p;
    throw ValidationError("preset: unknown preset '" + name + "'");
}

const std::vector<Preset>& all_presets() {
    static const std::vector<Preset> v{Preset::Fig1, Preset::Fig2, Preset::Fig3,
                                       Preset::Fig4, Preset::Fig5, Preset::Table1};
    return v;
}

const std::array<TableRow, 5>& table1_reference() {
    static const std::array<TableRow, 5> rows{{
        {5e-1, 1.0, 1e2, 1e-2, -0.7996422, 3.0159928e2, 3.0271643e2, 3.0247033e2},
        {5e-3, 1e-1, 1e3, 1e-4, -0.6942948, 3.0013888e4, 3.0353657e4, 3.0199008e4},
        {5e-5, 1e-2, 1e4, 1e-6, -0.6931597, 3.0001386e6, 3.0325289e6, 3.0273962e6},
        {5e-7, 1e-3, 1e5, 1e-8, -0.6931473, 3.0000139e8, 3.0309571e8, 3.0289827e8},
        {5e-9, 1e-4, 1e6, 1e-10, -0.6931472, 3.0000014e10, 3.0307969e10, 3.0292251e10},
    }};
    return rows;
}

CoherentState figure_state(Preset p) {
    switch (p) {
    case Preset::Fig3: return {1e2, 1.0, 1e-2};
    case Preset::Fig4: return {1e4, 1e-2, 1e-6};
    case Preset::Fig5: return {1e6, 1e-4, 1e-10};
    default: throw ValidationError("preset: " + preset_name(p) + " has no wavepacket");
    }
}

bool Summary::all_pass() const {
    if (failed) return false;
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* Summary::find(const std::string& name) const {
    for (const Check& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

std::string output_root(const std::string& fallback) {
    const char* e = std::getenv("QTHRESHOLD_OUT");
    return (e && *e) ? std::string(e) : fallback;
}

void write_summary(const Summary& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write " + path);
    f << "preset=" << preset_name(s.preset) << '\n';
    f << "status=" << (s.failed ? "FAILED" : (s.all_pass() ? "pass" : "fail")) << '\n';
    if (s.failed) f << "error=" << s.error << '\n';
    for (const auto& [k, v] : s.config) f << "config." << k << '=' << v << '\n';
    for (const Check& c : s.checks) {
        const std::string p = "check." + c.name + ".";
        f << p << "reference=" << fmt9(c.reference) << '\n'
          << p << "achieved=" << fmt9(c.achieved) << '\n'
          << p << "deviation=" << fmt9(c.deviation) << '\n'
          << p << "tolerance=" << fmt9(c.tolerance) << '\n'
          << p << "pass=" << (c.pass ? "true" : "false") << '\n';
    }
    f << "wall_clock_s=" << fmt9(s.wall_clock) << '\n';
}

void append_table1_csv(const std::vector<FlightTimeReport>& rows, const std::string& path) {
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    std::ofstream f(path, std::ios::app);
    if (!f) throw ValidationError("cannot write " + path);
    if (fresh) f << "E_i,minus_p_i,z_i,Gamma,z_TP,t_free,t_QM,t_W,t_W_stderr\n";
    for (const FlightTimeReport& r : rows)
        f << fmt9(r.E) << ',' << fmt9(-r.p_i) << ',' << fmt9(r.z_i) << ',' << fmt9(r.gamma) << ','
          << fmt9(r.z_tp) << ',' << fmt9(r.t_free) << ',' << fmt9(r.t_qm) << ',' << fmt9(r.t_w) << ','
          << fmt9(r.t_w_stderr) << '\n';
}

ContrastStats profile_contrast(const std::vector<double>& f, double floor, double threshold) {
    ContrastStats st;
    const std::size_t n = f.size();
    if (n < 3) return st;
    const double top = *std::max_element(f.begin(), f.end());
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(f[i] > f[i - 1] && f[i] >= f[i + 1]) || f[i] < floor * top) continue;
        std::size_t l = i, r = i;
        while (l > 0 && f[l - 1] <= f[l]) --l;
        while (r + 1 < n && f[r + 1] <= f[r]) ++r;
        // a side running into the profile edge has no minimum
        const bool hl = l > 0, hr = r + 1 < n;
        if (!hl && !hr) continue;
        const double m = hl && hr ? std::max(f[l], f[r]) : (hl ? f[l] : f[r]);
        const double c = (f[i] - m) / (f[i] + m);
        ++st.n_maxima;
        if (c > threshold) ++st.n_contrasted;
        st.max_contrast = std::max(st.max_contrast, c);
    }
    return st;
}

Summary run(Preset p, const Overrides& ov, const std::string& out_root) {
    const auto t0 = std::chrono::steady_clock::now();
    Summary sum;
    sum.preset = p;
    const fs::path dir = fs::path(out_root) / preset_name(p);
    fs::create_directories(dir);
    fs::remove(dir / "FAILED");
    Run r{sum, dir, ov, MorseParams{}};
    auto finish = [&] {
        sum.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_summary(sum, (dir / "summary.txt").string());
    };
    try {
        switch (p) {
        case Preset::Fig1: r.fig1(); break;
        case Preset::Fig2: r.fig2(); break;
        case Preset::Fig3:
        case Preset::Fig4:
        case Preset::Fig5: r.density(p); break;
        case Preset::Table1: r.table1(); break;
        }
    } catch (const std::exception& e) {
        sum.failed = true;
        sum.error = e.what();
        finish();
        std::ofstream(dir / "FAILED") << e.what() << '\n';
        throw;
    }
    finish();
    return sum;
}

} // namespace qthr
