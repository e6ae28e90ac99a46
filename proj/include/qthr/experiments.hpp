#pragma once

#include "qthr/cwigner.hpp"
#include "qthr/morse.hpp"
#include "qthr/qdyn.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qthr {

/// Nine significant digits, the output precision everywhere.
std::string format9(double v);

enum class Preset { Fig1, Fig2, Fig3, Fig4, Fig5, Table1 };

std::string preset_name(Preset p);
Preset parse_preset(const std::string& name);
const std::vector<Preset>& all_presets();

struct TableRow {
    double E;
    double p_i, z_i, gamma;
    double z_tp, t_free, t_qm, t_w;  // reference values
};

const std::array<TableRow, 5>& table1_reference();

/// Initial state of the density presets (Fig3, Fig4, Fig5).
CoherentState figure_state(Preset p);

struct Overrides {
    std::optional<long long> n_traj;
    std::optional<std::uint64_t> seed;
    std::optional<long> k_points;
    std::optional<long> grid_points;  // nz = nt
    std::vector<int> rows;            // Table1 subset, 1-based; empty = all
    bool k_doubling = true;           // Table1 convergence probe
    int threads = 0;
};

struct Check {
    std::string name;
    double reference = 0.0;
    double achieved = 0.0;
    double deviation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct FlightTimeReport {
    int row = 0;
    double E = 0, p_i = 0, z_i = 0, gamma = 0;
    double z_tp = 0, t_free = 0, t_qm = 0, t_w = 0, t_w_stderr = 0;
};

struct Summary {
    Preset preset = Preset::Fig1;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<Check> checks;
    std::vector<FlightTimeReport> rows;
    double wall_clock = 0.0;
    bool failed = false;
    std::string error;

    bool all_pass() const;
    const Check* find(const std::string& name) const;
};

/// Output root: $QTHRESHOLD_OUT if set, otherwise fallback.
std::string output_root(const std::string& fallback = "out");

/// Runs one preset and writes out_root/<preset>/...; on error a FAILED marker and the
/// partial summary are written before the exception propagates.
Summary run(Preset p, const Overrides& ov = {}, const std::string& out_root = output_root());

void write_summary(const Summary& s, const std::string& path);
void append_table1_csv(const std::vector<FlightTimeReport>& rows, const std::string& path);

/// Local maxima of a profile at or above floor * max, and their contrast
/// (peak - m)/(peak + m) against the higher of the two neighbouring interior minima.
/// A maximum with no interior minimum on either side is not counted.
struct ContrastStats {
    int n_maxima = 0;         // maxima above the floor
    int n_contrasted = 0;     // of those, contrast > threshold
    double max_contrast = 0.0;
};
ContrastStats profile_contrast(const std::vector<double>& f, double floor = 0.1, double threshold = 0.5);

} // namespace qthr
