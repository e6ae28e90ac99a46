#pragma once

#include "qthr/cwigner.hpp"
#include "qthr/morse.hpp"
#include "qthr/qdyn.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace qthr {

inline constexpr double kAuto = std::numeric_limits<double>::quiet_NaN();

struct RunConfig {
    // [run]
    std::string out_dir = "out";
    int threads = 0;
    int verbosity = 0;

    MorseParams morse;
    CoherentState state;

    // [grid]; NaN means derived from the state
    long nz = 2000, nt = 2000;
    double z_min = kAuto, z_max = kAuto, t_min = 0.0, t_max = kAuto;
    long k_points = 50000;
    KRule k_rule = KRule::Trapezoid;
    std::string format = "qtrd";  // qtrd | csv | both

    // [reflect]
    double reflect_k_min = 1e-4, reflect_k_max = 1e-2;
    long reflect_n = 100;
    std::string reflect_spacing = "log";

    // [badlands]
    std::vector<double> badlands_energies{5e-5, 5e-6, 5e-7, 5e-8, 5e-9};
    double badlands_z_max = 50.0;
    long badlands_n = 2000;

    // [senn]
    std::string senn_potential = "square_well";
    double senn_V0 = 1.0, senn_a = 1.0, senn_V1 = 1.0, senn_V2 = 0.5, senn_sigma = 1.0;
    std::string senn_table;
    std::string senn_topology = "two_sided";
    std::vector<double> senn_k{0.5};

    // [ensemble]
    EnsembleConfig ensemble;
    DensityNormalization normalization = DensityNormalization::PerSlice;

    // [flight]
    std::vector<int> flight_rows;  // empty = all five
    double flight_y = kAuto;       // NaN = 2 z_i
    long flight_k_points = 50000;
    bool flight_k_doubling = false;

    // [reproduce]
    std::vector<std::string> reproduce_presets;  // empty = all
    long long reproduce_n_traj = 10'000'000;
    std::uint64_t reproduce_seed = 1;
    long reproduce_grid_points = 2000;
    long reproduce_k_points = 50000;
    std::vector<int> reproduce_rows;
    bool reproduce_k_doubling = true;
};

struct ConfigKey {
    std::string section;
    std::string name;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;

    std::string qualified() const { return section + "." + name; }
    std::string flag() const;  // --name with '_' -> '-'
};

const std::vector<ConfigKey>& config_keys();
const ConfigKey* find_key(const std::string& qualified);

/// Sections read by each subcommand.
const std::vector<std::string>& command_sections(const std::string& command);
const std::vector<std::string>& commands();

/// Sets one key; ValidationError names the key on bad input.
void set_key(RunConfig& cfg, const std::string& qualified, const std::string& value);

/// Applies a key=value file with [section] headers. Unknown keys, or keys from a
/// section not listed in allowed (when non-empty), are rejected.
void apply_config_file(RunConfig& cfg, const std::string& path,
                       const std::vector<std::string>& allowed = {});
void apply_config_text(RunConfig& cfg, const std::string& text,
                       const std::vector<std::string>& allowed = {});

/// Fully resolved config for the given sections, round-trip exact.
std::string to_config_text(const RunConfig& cfg, const std::vector<std::string>& sections);

/// Shortest round-trip representation.
std::string format_exact(double v);

} // namespace qthr
