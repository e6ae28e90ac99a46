#include "qthr/runconfig.hpp"

#include "qthr/errors.hpp"
#include "qthr/experiments.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <type_traits>

namespace qthr {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
    throw ValidationError("key '" + key + "': " + what);
}

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& raw, bool allow_auto = false) {
    const std::string s = trim(raw);
    if (allow_auto && s == "auto") return kAuto;
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        bad(key, "expected a finite number, got '" + raw + "'");
    return v;
}

long long to_integer(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size()) return v;
    // accept integral values written in float notation, e.g. 1e7
    const double d = to_double(key, raw);
    if (d != std::floor(d) || std::abs(d) > 9e18) bad(key, "expected an integer, got '" + raw + "'");
    return static_cast<long long>(d);
}

double positive(const std::string& key, double v) {
    if (!(v > 0.0)) bad(key, "must be positive (got " + format_exact(v) + ")");
    return v;
}

long long at_least(const std::string& key, long long v, long long lo) {
    if (v < lo) bad(key, "must be >= " + std::to_string(lo) + " (got " + std::to_string(v) + ")");
    return v;
}

bool to_bool(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad(key, "expected true or false, got '" + raw + "'");
}

std::string choice(const std::string& key, const std::string& raw, std::initializer_list<const char*> allowed) {
    const std::string s = trim(raw);
    std::string list;
    for (const char* a : allowed) {
        if (s == a) return s;
        list += (list.empty() ? "" : "|") + std::string(a);
    }
    bad(key, "expected one of " + list + ", got '" + raw + "'");
}

std::string auto_or(double v) { return std::isnan(v) ? "auto" : format_exact(v); }

std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ",") + format_exact(x);
    return s;
}

std::vector<int> to_rows(const std::string& key, const std::string& raw) {
    if (trim(raw) == "all") return {};
    std::vector<int> rows;
    for (const std::string& t : split(raw)) {
        const long long r = to_integer(key, t);
        if (r < 1 || r > 5) bad(key, "row must be 1..5 (got " + t + ")");
        rows.push_back(static_cast<int>(r));
    }
    if (rows.empty()) bad(key, "empty row list");
    return rows;
}

std::string rows_text(const std::vector<int>& rows) {
    if (rows.empty()) return "all";
    std::string s;
    for (int r : rows) s += (s.empty() ? "" : ",") + std::to_string(r);
    return s;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

std::vector<ConfigKey> build_keys() {
    std::vector<ConfigKey> k;
    auto add = [&](std::string sec, std::string name, std::string help, Setter set, Getter get) {
        k.push_back({std::move(sec), std::move(name), std::move(help), std::move(set), std::move(get)});
    };
    auto num = [&](std::string sec, std::string name, std::string help, auto member, bool pos, bool allow_auto = false) {
        const std::string q = sec + "." + name;
        add(sec, name, help,
            [=](RunConfig& c, const std::string& v) {
                double x = to_double(q, v, allow_auto);
                if (pos && !std::isnan(x)) positive(q, x);
                c.*member = x;
            },
            [=](const RunConfig& c) { return auto_or(c.*member); });
    };
    auto integer = [&](std::string sec, std::string name, std::string help, auto get_ref, long long lo) {
        const std::string q = sec + "." + name;
        add(sec, name, help,
            [=](RunConfig& c, const std::string& v) {
                auto& ref = get_ref(c);
                ref = static_cast<std::remove_reference_t<decltype(ref)>>(at_least(q, to_integer(q, v), lo));
            },
            [=](const RunConfig& c) { return std::to_string(get_ref(const_cast<RunConfig&>(c))); });
    };

    add("run", "out_dir", "output root directory",
        [](RunConfig& c, const std::string& v) {
            if (trim(v).empty()) bad("run.out_dir", "must not be empty");
            c.out_dir = trim(v);
        },
        [](const RunConfig& c) { return c.out_dir; });
    integer("run", "threads", "worker threads (0 = available parallelism)", [](RunConfig& c) -> int& { return c.threads; }, 0);
    integer("run", "verbosity", "diagnostic verbosity", [](RunConfig& c) -> int& { return c.verbosity; }, 0);

    auto morse = [&](std::string name, double MorseParams::*m, bool pos) {
        const std::string q = "morse." + name;
        add("morse", name, "Morse parameter " + name,
            [=](RunConfig& c, const std::string& v) {
                double x = to_double(q, v);
                if (pos) positive(q, x);
                c.morse.*m = x;
            },
            [=](const RunConfig& c) { return format_exact(c.morse.*m); });
    };
    morse("V", &MorseParams::V, true);
    morse("d", &MorseParams::d, true);
    morse("z0", &MorseParams::z0, false);
    morse("m", &MorseParams::m, true);
    morse("hbar", &MorseParams::hbar, true);

    auto state = [&](std::string name, double CoherentState::*m, bool pos) {
        const std::string q = "state." + name;
        add("state", name, "coherent state " + name,
            [=](RunConfig& c, const std::string& v) {
                double x = to_double(q, v);
                if (pos) positive(q, x);
                c.state.*m = x;
            },
            [=](const RunConfig& c) { return format_exact(c.state.*m); });
    };
    state("z_i", &CoherentState::z_i, true);
    state("p_i", &CoherentState::p_i, true);
    state("gamma", &CoherentState::gamma, true);

    integer("grid", "nz", "z points", [](RunConfig& c) -> long& { return c.nz; }, 2);
    integer("grid", "nt", "t points", [](RunConfig& c) -> long& { return c.nt; }, 2);
    num("grid", "z_min", "lower z (auto = z_TP - 2d)", &RunConfig::z_min, false, true);
    num("grid", "z_max", "upper z (auto = 6 z_i)", &RunConfig::z_max, false, true);
    num("grid", "t_min", "first time", &RunConfig::t_min, false);
    num("grid", "t_max", "last time (auto = 2.2 t_free)", &RunConfig::t_max, true, true);
    integer("grid", "k_points", "k quadrature points", [](RunConfig& c) -> long& { return c.k_points; }, 2);
    add("grid", "k_rule", "trapezoid|gauss_legendre",
        [](RunConfig& c, const std::string& v) {
            c.k_rule = choice("grid.k_rule", v, {"trapezoid", "gauss_legendre"}) == "trapezoid" ? KRule::Trapezoid
                                                                                                 : KRule::GaussLegendre;
        },
        [](const RunConfig& c) { return std::string(c.k_rule == KRule::Trapezoid ? "trapezoid" : "gauss_legendre"); });
    add("grid", "format", "qtrd|csv|both",
        [](RunConfig& c, const std::string& v) { c.format = choice("grid.format", v, {"qtrd", "csv", "both"}); },
        [](const RunConfig& c) { return c.format; });

    num("reflect", "k_min", "smallest k", &RunConfig::reflect_k_min, true);
    num("reflect", "k_max", "largest k", &RunConfig::reflect_k_max, true);
    integer("reflect", "n", "number of k values", [](RunConfig& c) -> long& { return c.reflect_n; }, 1);
    add("reflect", "spacing", "log|linear",
        [](RunConfig& c, const std::string& v) { c.reflect_spacing = choice("reflect.spacing", v, {"log", "linear"}); },
        [](const RunConfig& c) { return c.reflect_spacing; });

    add("badlands", "energies", "comma-separated energies",
        [](RunConfig& c, const std::string& v) {
            std::vector<double> e;
            for (const std::string& t : split(v)) e.push_back(positive("badlands.energies", to_double("badlands.energies", t)));
            if (e.empty()) bad("badlands.energies", "empty list");
            c.badlands_energies = e;
        },
        [](const RunConfig& c) { return join_doubles(c.badlands_energies); });
    num("badlands", "z_max", "upper end of the |Q| curves", &RunConfig::badlands_z_max, false);
    integer("badlands", "n", "points per curve", [](RunConfig& c) -> long& { return c.badlands_n; }, 2);

    add("senn", "potential", "square_well|square_barrier|two_step_well|gaussian_well|morse|table",
        [](RunConfig& c, const std::string& v) {
            c.senn_potential = choice("senn.potential", v,
                                      {"square_well", "square_barrier", "two_step_well", "gaussian_well", "morse", "table"});
        },
        [](const RunConfig& c) { return c.senn_potential; });
    num("senn", "V0", "depth or height", &RunConfig::senn_V0, true);
    num("senn", "a", "half width", &RunConfig::senn_a, true);
    num("senn", "V1", "inner step depth", &RunConfig::senn_V1, true);
    num("senn", "V2", "outer step depth", &RunConfig::senn_V2, true);
    num("senn", "sigma", "gaussian width", &RunConfig::senn_sigma, true);
    add("senn", "table", "file of (x, V) pairs",
        [](RunConfig& c, const std::string& v) { c.senn_table = trim(v); },
        [](const RunConfig& c) { return c.senn_table; });
    add("senn", "topology", "two_sided|right_wall",
        [](RunConfig& c, const std::string& v) { c.senn_topology = choice("senn.topology", v, {"two_sided", "right_wall"}); },
        [](const RunConfig& c) { return c.senn_topology; });
    add("senn", "k", "comma-separated wavenumbers",
        [](RunConfig& c, const std::string& v) {
            std::vector<double> ks;
            for (const std::string& t : split(v)) ks.push_back(positive("senn.k", to_double("senn.k", t)));
            if (ks.empty()) bad("senn.k", "empty list");
            c.senn_k = ks;
        },
        [](const RunConfig& c) { return join_doubles(c.senn_k); });

    integer("ensemble", "n_traj", "trajectories", [](RunConfig& c) -> long long& { return c.ensemble.n_traj; }, 1000);
    add("ensemble", "seed", "random seed",
        [](RunConfig& c, const std::string& v) {
            const long long s = to_integer("ensemble.seed", v);
            if (s < 0) bad("ensemble.seed", "must be >= 0");
            c.ensemble.seed = static_cast<std::uint64_t>(s);
        },
        [](const RunConfig& c) { return std::to_string(c.ensemble.seed); });
    add("ensemble", "energy_tolerance", "relative energy drift bound",
        [](RunConfig& c, const std::string& v) {
            c.ensemble.energy_tolerance = positive("ensemble.energy_tolerance", to_double("ensemble.energy_tolerance", v));
        },
        [](const RunConfig& c) { return format_exact(c.ensemble.energy_tolerance); });
    add("ensemble", "z_cut", "free-flight radius (auto = |V| < 1e-6 E_i)",
        [](RunConfig& c, const std::string& v) {
            const double x = to_double("ensemble.z_cut", v, true);
            c.ensemble.z_cut = std::isnan(x) ? 0.0 : positive("ensemble.z_cut", x);
        },
        [](const RunConfig& c) { return c.ensemble.z_cut == 0.0 ? std::string("auto") : format_exact(c.ensemble.z_cut); });
    add("ensemble", "sampling", "antithetic|plain",
        [](RunConfig& c, const std::string& v) {
            c.ensemble.sampling = choice("ensemble.sampling", v, {"antithetic", "plain"}) == "plain" ? Sampling::Plain
                                                                                                    : Sampling::Antithetic;
        },
        [](const RunConfig& c) { return std::string(c.ensemble.sampling == Sampling::Plain ? "plain" : "antithetic"); });
    add("ensemble", "transit", "tabulated|direct",
        [](RunConfig& c, const std::string& v) {
            c.ensemble.transit = choice("ensemble.transit", v, {"tabulated", "direct"}) == "direct" ? TransitMode::Direct
                                                                                                  : TransitMode::Tabulated;
        },
        [](const RunConfig& c) { return std::string(c.ensemble.transit == TransitMode::Direct ? "direct" : "tabulated"); });
    add("ensemble", "normalization", "per_slice|ensemble|counts",
        [](RunConfig& c, const std::string& v) {
            const std::string s = choice("ensemble.normalization", v, {"per_slice", "ensemble", "counts"});
            c.normalization = s == "per_slice" ? DensityNormalization::PerSlice
                              : s == "ensemble" ? DensityNormalization::Ensemble
                                                : DensityNormalization::Counts;
        },
        [](const RunConfig& c) {
            return std::string(c.normalization == DensityNormalization::PerSlice  ? "per_slice"
                               : c.normalization == DensityNormalization::Ensemble ? "ensemble"
                                                                                   : "counts");
        });

    add("flight", "row", "Table 1 rows, comma-separated or all",
        [](RunConfig& c, const std::string& v) { c.flight_rows = to_rows("flight.row", v); },
        [](const RunConfig& c) { return rows_text(c.flight_rows); });
    num("flight", "y", "arrival position (auto = 2 z_i)", &RunConfig::flight_y, true, true);
    integer("flight", "k_points", "k quadrature points", [](RunConfig& c) -> long& { return c.flight_k_points; }, 2);
    add("flight", "k_doubling", "also run with 2 k_points and report the change",
        [](RunConfig& c, const std::string& v) { c.flight_k_doubling = to_bool("flight.k_doubling", v); },
        [](const RunConfig& c) { return std::string(c.flight_k_doubling ? "true" : "false"); });

    add("reproduce", "presets", "comma-separated presets or all",
        [](RunConfig& c, const std::string& v) {
            if (trim(v) == "all") {
                c.reproduce_presets.clear();
                return;
            }
            std::vector<std::string> ps = split(v);
            for (const std::string& p : ps) {
                try {
                    parse_preset(p);
                } catch (const ValidationError&) {
                    bad("reproduce.presets", "unknown preset '" + p + "'");
                }
            }
            if (ps.empty()) bad("reproduce.presets", "empty list");
            c.reproduce_presets = ps;
        },
        [](const RunConfig& c) {
            if (c.reproduce_presets.empty()) return std::string("all");
            std::string s;
            for (const std::string& p : c.reproduce_presets) s += (s.empty() ? "" : ",") + p;
            return s;
        });
    integer("reproduce", "n_traj", "trajectories", [](RunConfig& c) -> long long& { return c.reproduce_n_traj; }, 1000);
    add("reproduce", "seed", "random seed",
        [](RunConfig& c, const std::string& v) {
            const long long s = to_integer("reproduce.seed", v);
            if (s < 0) bad("reproduce.seed", "must be >= 0");
            c.reproduce_seed = static_cast<std::uint64_t>(s);
        },
        [](const RunConfig& c) { return std::to_string(c.reproduce_seed); });
    integer("reproduce", "grid_points", "points per grid axis", [](RunConfig& c) -> long& { return c.reproduce_grid_points; }, 2);
    integer("reproduce", "k_points", "k quadrature points", [](RunConfig& c) -> long& { return c.reproduce_k_points; }, 2);
    add("reproduce", "rows", "Table 1 rows, comma-separated or all",
        [](RunConfig& c, const std::string& v) { c.reproduce_rows = to_rows("reproduce.rows", v); },
        [](const RunConfig& c) { return rows_text(c.reproduce_rows); });
    add("reproduce", "k_doubling", "Table 1 convergence probe with 2 k_points",
        [](RunConfig& c, const std::string& v) { c.reproduce_k_doubling = to_bool("reproduce.k_doubling", v); },
        [](const RunConfig& c) { return std::string(c.reproduce_k_doubling ? "true" : "false"); });
    return k;
}

} // namespace

std::string ConfigKey::flag() const {
    std::string f = "--" + name;
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

std::string format_exact(double v) {
    char b[64];
    const auto [p, ec] = std::to_chars(b, b + sizeof b, v);
    return ec == std::errc() ? std::string(b, p) : std::string("nan");
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

const ConfigKey* find_key(const std::string& qualified) {
    for (const ConfigKey& k : config_keys())
        if (k.qualified() == qualified) return &k;
    return nullptr;
}

const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"reflect", "badlands", "senn", "propagate", "wigner", "flight-times", "reproduce"};
    return c;
}

const std::vector<std::string>& command_sections(const std::string& command) {
    static const std::map<std::string, std::vector<std::string>> m{
        {"reflect", {"run", "morse", "reflect"}},
        {"badlands", {"run", "morse", "badlands"}},
        {"senn", {"run", "morse", "senn"}},
        {"propagate", {"run", "morse", "state", "grid"}},
        {"wigner", {"run", "morse", "state", "grid", "ensemble"}},
        {"flight-times", {"run", "morse", "ensemble", "flight"}},
        {"reproduce", {"run", "reproduce"}},
    };
    const auto it = m.find(command);
    if (it == m.end()) throw ValidationError("unknown subcommand '" + command + "'");
    return it->second;
}

void set_key(RunConfig& cfg, const std::string& qualified, const std::string& value) {
    const ConfigKey* k = find_key(qualified);
    if (!k) throw ValidationError("key '" + qualified + "': unknown key");
    k->set(cfg, value);
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::vector<std::string>& allowed) {
    std::istringstream in(text);
    CLI::ConfigINI ini;
    std::vector<CLI::ConfigItem> items;
    try {
        items = ini.from_config(in);
    } catch (const CLI::Error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    for (const CLI::ConfigItem& it : items) {
        if (it.name == "++" || it.name == "--") continue;  // section markers
        if (it.parents.empty() || it.parents.front() == "default")
            throw ValidationError("key '" + it.name + "': keys must sit inside a [section]");
        if (it.parents.size() > 1) throw ValidationError("key '" + it.fullname() + "': nested sections are not supported");
        const std::string q = it.parents.front() + "." + it.name;
        const ConfigKey* k = find_key(q);
        if (!k) throw ValidationError("key '" + q + "': unknown key");
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), k->section) == allowed.end())
            throw ValidationError("key '" + q + "': section [" + k->section + "] is not used by this command");
        std::string v;
        for (const std::string& s : it.inputs) v += (v.empty() ? "" : ",") + s;
        k->set(cfg, v);
    }
}

void apply_config_file(RunConfig& cfg, const std::string& path, const std::vector<std::string>& allowed) {
    std::ifstream f(path);
    if (!f) throw ValidationError("key 'config': cannot read '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    apply_config_text(cfg, ss.str(), allowed);
}

std::string to_config_text(const RunConfig& cfg, const std::vector<std::string>& sections) {
    std::string out;
    for (const std::string& sec : sections) {
        out += "[" + sec + "]\n";
        for (const ConfigKey& k : config_keys())
            if (k.section == sec) out += k.name + "=" + k.get(cfg) + "\n";
        out += "\n";
    }
    return out;
}

} // namespace qthr
