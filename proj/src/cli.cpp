#include "qthr/cli.hpp"

#include "qthr/cwigner.hpp"
#include "qthr/errors.hpp"
#include "qthr/experiments.hpp"
#include "qthr/morse.hpp"
#include "qthr/qdyn.hpp"
#include "qthr/runconfig.hpp"
#include "qthr/senn.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

namespace qthr {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::string>& descriptions() {
    static const std::map<std::string, std::string> d{
        {"reflect", "Morse reflection amplitude R(k) sweep"},
        {"badlands", "badlands function |Q(z)| and its peak"},
        {"senn", "reflection and transmission for a general potential"},
        {"propagate", "quantum space-time density of the coherent state"},
        {"wigner", "classical Wigner space-time density"},
        {"flight-times", "Table 1 mean flight times"},
        {"reproduce", "run the figure and table presets"},
    };
    return d;
}

struct Context {
    RunConfig cfg;
    std::string command;
    fs::path dir;
    std::ostream& out;
    std::ostream& err;

    void note(const std::string& s) const {
        if (cfg.verbosity > 0) err << s << '\n';
    }
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    if (!f) throw ValidationError("key 'run.out_dir': cannot write " + p.string());
    f << text;
}

std::ofstream open_csv(const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw ValidationError("key 'run.out_dir': cannot write " + p.string());
    return f;
}

std::string f9(double v) { return format9(v); }

void cmd_reflect(Context& c) {
    const RunConfig& g = c.cfg;
    if (g.reflect_k_max < g.reflect_k_min) throw ValidationError("key 'reflect.k_max': must be >= k_min");
    std::vector<double> k(g.reflect_n);
    for (long i = 0; i < g.reflect_n; ++i) {
        const double f = g.reflect_n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(g.reflect_n - 1);
        k[i] = g.reflect_spacing == "log" ? g.reflect_k_min * std::pow(g.reflect_k_max / g.reflect_k_min, f)
                                          : g.reflect_k_min + f * (g.reflect_k_max - g.reflect_k_min);
    }
    auto f = open_csv(c.dir / "reflect.csv");
    f << "k,re_R,im_R,abs_R\n";
    double worst = 0.0;
    for (double kk : k) {
        const cplx r = reflection_amplitude(g.morse, kk).amplitude;
        f << f9(kk) << ',' << f9(r.real()) << ',' << f9(r.imag()) << ',' << f9(std::abs(r)) << '\n';
        worst = std::max(worst, std::abs(std::abs(r) - 1.0));
    }
    c.out << "points=" << k.size() << " max_abs_R_minus_1=" << f9(worst)
          << " threshold_slope=" << f9(threshold_slope(g.morse)) << '\n';
}

void cmd_badlands(Context& c) {
    const RunConfig& g = c.cfg;
    double z_lo = -1e300;
    for (double e : g.badlands_energies) z_lo = std::max(z_lo, turning_point(g.morse, e));
    z_lo += 1e-3 * g.morse.d;
    if (!(g.badlands_z_max > z_lo)) throw ValidationError("key 'badlands.z_max': must exceed the turning points");
    const std::vector<double> z = linspace(z_lo, g.badlands_z_max, g.badlands_n);
    auto f = open_csv(c.dir / "badlands.csv");
    f << 'z';
    for (double e : g.badlands_energies) f << ",absQ_E" << f9(e);
    f << '\n';
    for (double zz : z) {
        f << f9(zz);
        for (double e : g.badlands_energies) f << ',' << f9(std::abs(badlands(g.morse, zz, e)));
        f << '\n';
    }
    auto p = open_csv(c.dir / "peaks.csv");
    p << "E,z_tp,z_bf,q_max\n";
    for (double e : g.badlands_energies) {
        const BadlandsPeak pk = badlands_peak(g.morse, e);
        const double ztp = turning_point(g.morse, e);
        p << f9(e) << ',' << f9(ztp) << ',' << f9(pk.z_bf) << ',' << f9(pk.q_max) << '\n';
        c.out << "E=" << f9(e) << " z_tp=" << f9(ztp) << " z_bf=" << f9(pk.z_bf) << " q_max=" << f9(pk.q_max) << '\n';
    }
}

PotentialModel senn_model(const RunConfig& g) {
    const std::string& n = g.senn_potential;
    if (n == "square_well") return square_well(g.senn_V0, g.senn_a);
    if (n == "square_barrier") return square_barrier(g.senn_V0, g.senn_a);
    if (n == "two_step_well") return two_step_well(g.senn_V1, g.senn_V2, g.senn_a);
    if (n == "gaussian_well") return gaussian_well(g.senn_V0, g.senn_sigma);
    if (n == "morse") return morse_wall(g.morse);
    if (g.senn_table.empty()) throw ValidationError("key 'senn.table': required for potential=table");
    return load_tabulated_potential(g.senn_table,
                                    g.senn_topology == "right_wall" ? Topology::RightWall : Topology::TwoSided);
}

void cmd_senn(Context& c) {
    const RunConfig& g = c.cfg;
    const PotentialModel model = senn_model(g);
    auto f = open_csv(c.dir / "senn.csv");
    const bool wall = model.topology == Topology::RightWall;
    f << "k,re_R,im_R,abs_R2,re_T,im_T,abs_T2,R2_plus_T2,wronskian_drift\n";
    for (double k : g.senn_k) {
        cplx R, T{0.0, 0.0};
        double drift = 0.0;
        if (wall) {
            R = reflection_origin(reflection_amplitude_wall(model, k), k, model.xi);
        } else {
            const BoundaryData b = fundamental_solutions(model, k);
            drift = b.max_wronskian_drift;
            R = reflection_origin(reflection_amplitude_general(model, k), k, model.xi);
            T = transmission_origin(transmission_amplitude(model, k), k, model.xi);
        }
        const double r2 = std::norm(R), t2 = std::norm(T);
        f << f9(k) << ',' << f9(R.real()) << ',' << f9(R.imag()) << ',' << f9(r2) << ',' << f9(T.real()) << ','
          << f9(T.imag()) << ',' << f9(t2) << ',' << f9(r2 + t2) << ',' << f9(drift) << '\n';
        c.out << "potential=" << model.name << " k=" << f9(k) << " R2=" << f9(r2) << " T2=" << f9(t2)
              << " R2_plus_T2=" << f9(r2 + t2);
        if (!wall) c.out << " wronskian_drift=" << f9(drift);
        c.out << '\n';
    }
}

struct Axes {
    std::vector<double> z, t;
};

Axes resolve_axes(const RunConfig& g) {
    const double E = g.state.energy(g.morse.m);
    const double ztp = turning_point(g.morse, E);
    const double z_min = std::isnan(g.z_min) ? ztp - 2.0 * g.morse.d : g.z_min;
    const double z_max = std::isnan(g.z_max) ? 6.0 * g.state.z_i : g.z_max;
    const double t_max = std::isnan(g.t_max) ? 2.2 * free_flight_time(g.morse, g.state, 2.0 * g.state.z_i) : g.t_max;
    if (!(z_max > z_min)) throw ValidationError("key 'grid.z_max': must exceed z_min");
    if (!(t_max > g.t_min)) throw ValidationError("key 'grid.t_max': must exceed t_min");
    return {linspace(z_min, z_max, g.nz), linspace(g.t_min, t_max, g.nt)};
}

void write_grid(const Context& c, const SpaceTimeDensity& d) {
    if (c.cfg.format != "csv") write_density_qtrd(d, (c.dir / "density.qtrd").string());
    if (c.cfg.format != "qtrd") write_density_csv(d, (c.dir / "density.csv").string());
}

void cmd_propagate(Context& c) {
    const RunConfig& g = c.cfg;
    const Axes ax = resolve_axes(g);
    PropagateOptions po;
    po.threads = g.threads;
    const KGrid kg = KGrid::for_state(g.morse, g.state, g.k_points, g.k_rule);
    c.note("propagate: " + std::to_string(ax.z.size()) + "x" + std::to_string(ax.t.size()) + " grid, " +
           std::to_string(kg.n) + " k points");
    const PropagateResult r = propagate(g.morse, g.state, kg, ax.z, ax.t, po);
    write_grid(c, r.density);
    if (r.quadrature_warning)
        c.err << "warning: k quadrature change " << f9(r.quadrature_change) << " exceeds 1e-6 (key 'grid.k_points')\n";
    c.out << "nz=" << ax.z.size() << " nt=" << ax.t.size() << " max_density=" << f9(r.density.max_value())
          << " self_test_error=" << f9(r.self_test_error) << " quadrature_change=" << f9(r.quadrature_change) << '\n';
}

void cmd_wigner(Context& c) {
    const RunConfig& g = c.cfg;
    const Axes ax = resolve_axes(g);
    EnsembleConfig e = g.ensemble;
    e.threads = g.threads;
    const SpaceTimeDensity d = density_grid(g.morse, g.state, e, ax.z, ax.t, g.normalization);
    write_grid(c, d);
    c.out << "nz=" << ax.z.size() << " nt=" << ax.t.size() << " n_traj=" << e.n_traj
          << " z_cut=" << f9(resolve_z_cut(g.morse, g.state, e)) << " max_density=" << f9(d.max_value()) << '\n';
}

void cmd_flight_times(Context& c) {
    const RunConfig& g = c.cfg;
    std::vector<int> rows = g.flight_rows;
    if (rows.empty()) rows = {1, 2, 3, 4, 5};
    EnsembleConfig e = g.ensemble;
    e.threads = g.threads;
    FlightTimeOptions fo;
    fo.threads = g.threads;
    std::vector<FlightTimeReport> reps;
    for (int r : rows) {
        const TableRow& T = table1_reference()[r - 1];
        const CoherentState s{T.z_i, T.p_i, T.gamma};
        const double y = std::isnan(g.flight_y) ? 2.0 * s.z_i : g.flight_y;
        if (!(y > s.z_i)) throw ValidationError("key 'flight.y': must exceed z_i = " + f9(s.z_i));
        FlightTimeReport rep{r, T.E, T.p_i, T.z_i, T.gamma};
        rep.z_tp = turning_point(g.morse, T.E);
        rep.t_free = free_flight_time(g.morse, s, y);
        c.note("row " + std::to_string(r) + ": quantum flight time");
        const FlightTimeQM q =
            mean_flight_time_qm(g.morse, s, y, 0.0, 2.0 * rep.t_free, KGrid::for_state(g.morse, s, g.flight_k_points), fo);
        rep.t_qm = q.mean;
        c.note("row " + std::to_string(r) + ": Wigner flight time");
        const FlightTimeW w = mean_flight_time_w(g.morse, s, e, y);
        rep.t_w = w.mean;
        rep.t_w_stderr = w.stderr_;
        c.out << "row=" << r << " E=" << f9(T.E) << " z_tp=" << f9(rep.z_tp) << " t_free=" << f9(rep.t_free)
              << " t_qm=" << f9(rep.t_qm) << " t_w=" << f9(rep.t_w) << " t_w_stderr=" << f9(rep.t_w_stderr)
              << " ref_t_qm=" << f9(T.t_qm) << " ref_t_w=" << f9(T.t_w);
        if (g.flight_k_doubling) {
            const FlightTimeQM q2 =
                mean_flight_time_qm(g.morse, s, y, 0.0, q.t_end, KGrid::for_state(g.morse, s, 2 * g.flight_k_points), fo);
            c.out << " t_qm_k_doubling_change=" << f9(std::abs(q2.mean / q.mean - 1.0));
        }
        c.out << '\n';
        reps.push_back(rep);
    }
    append_table1_csv(reps, (c.dir / "flight_times.csv").string());
}

int cmd_reproduce(Context& c) {
    const RunConfig& g = c.cfg;
    std::vector<Preset> presets;
    if (g.reproduce_presets.empty()) presets = all_presets();
    for (const std::string& p : g.reproduce_presets) presets.push_back(parse_preset(p));
    Overrides ov;
    ov.n_traj = g.reproduce_n_traj;
    ov.seed = g.reproduce_seed;
    ov.grid_points = g.reproduce_grid_points;
    ov.k_points = g.reproduce_k_points;
    ov.rows = g.reproduce_rows;
    ov.k_doubling = g.reproduce_k_doubling;
    ov.threads = g.threads;
    int code = 0;
    for (Preset p : presets) {
        c.note("reproduce: " + preset_name(p));
        try {
            const Summary s = run(p, ov, g.out_dir);
            int failed = 0;
            for (const Check& k : s.checks) failed += !k.pass;
            c.out << "preset=" << preset_name(p) << " status=" << (s.all_pass() ? "pass" : "fail")
                  << " checks=" << s.checks.size() << " failed=" << failed << " wall_clock_s=" << f9(s.wall_clock)
                  << '\n';
        } catch (const Error& e) {
            c.out << "preset=" << preset_name(p) << " status=FAILED\n";
            c.err << "error: " << preset_name(p) << ": " << e.what() << '\n';
            code = std::max(code, e.exit_code());
        }
    }
    return code;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"qthreshold: threshold reflection from the Morse potential"};
    app.name("qthreshold");
    app.require_subcommand(1, 1);
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> flags;
    std::map<std::string, std::string> config_path;
    for (const std::string& cmd : commands()) {
        CLI::App* sc = app.add_subcommand(cmd, descriptions().at(cmd));
        sc->add_option("--config", config_path[cmd], "key=value file with [section] headers");
        for (const std::string& sec : command_sections(cmd))
            for (const ConfigKey& k : config_keys()) {
                if (k.section != sec) continue;
                const std::string q = k.qualified();
                sc->add_option_function<std::string>(
                      k.flag(), [&flags, cmd, q](const std::string& v) { flags[cmd].emplace_back(q, v); },
                      k.help + " [" + q + "]")
                    ->option_text("VALUE");
            }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        Context c{RunConfig{}, cmd, {}, out, err};
        const auto& sections = command_sections(cmd);
        if (!config_path[cmd].empty()) apply_config_file(c.cfg, config_path[cmd], sections);
        for (const auto& [q, v] : flags[cmd]) set_key(c.cfg, q, v);
        if (const char* env = std::getenv("QTHRESHOLD_OUT"); env && *env) c.cfg.out_dir = env;
        c.cfg.morse.validate();
        if (std::find(sections.begin(), sections.end(), "state") != sections.end()) c.cfg.state.validate();
        c.dir = fs::path(c.cfg.out_dir) / cmd;
        fs::create_directories(c.dir);
        write_text(c.dir / "config.ini", to_config_text(c.cfg, sections));
        if (cmd == "reflect") cmd_reflect(c);
        else if (cmd == "badlands") cmd_badlands(c);
        else if (cmd == "senn") cmd_senn(c);
        else if (cmd == "propagate") cmd_propagate(c);
        else if (cmd == "wigner") cmd_wigner(c);
        else if (cmd == "flight-times") cmd_flight_times(c);
        else return cmd_reproduce(c);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        err << "error: key 'run.out_dir': " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace qthr
