#include "qthr/errors.hpp"
#include "qthr/experiments.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace qthr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string without_clock(const std::string& s) {
    std::string out, line;
    std::istringstream in(s);
    while (std::getline(in, line))
        if (line.rfind("wall_clock_s=", 0) != 0) out += line + '\n';
    return out;
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("qthr_test_experiments_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("formatting and presets") {
    CHECK(format9(302.716431234) == "302.716431");
    CHECK(format9(3.0e10) == "3e+10");
    for (Preset p : all_presets()) CHECK(parse_preset(preset_name(p)) == p);
    CHECK(all_presets().size() == 6);
    CHECK_THROWS_AS(parse_preset("Fig9"), ValidationError);
    const auto& t = table1_reference();
    for (std::size_t i = 1; i < t.size(); ++i) {
        CHECK(t[i].E == doctest::Approx(t[i - 1].E / 100.0));
        CHECK(t[i].E == doctest::Approx(0.5 * t[i].p_i * t[i].p_i));
    }
    CHECK(figure_state(Preset::Fig3).p_i == 1.0);
    CHECK(figure_state(Preset::Fig5).p_i == 1e-4);
    CHECK(figure_state(Preset::Fig5).z_i == 1e6);
    CHECK_THROWS_AS(figure_state(Preset::Fig1), ValidationError);
}

TEST_CASE("profile contrast") {
    std::vector<double> fringes, smooth;
    for (int i = 0; i < 2000; ++i) {
        const double x = i * 0.01;
        fringes.push_back(std::pow(std::sin(x), 2) * std::exp(-0.01 * x * x) + 1e-6);
        smooth.push_back(std::exp(-(x - 10) * (x - 10)));
    }
    auto a = profile_contrast(fringes);
    CHECK(a.n_maxima >= 4);
    CHECK(a.n_contrasted == a.n_maxima);
    CHECK(a.max_contrast > 0.99);
    // a lone bump is not a fringe
    auto b = profile_contrast(smooth);
    CHECK(b.n_maxima == 0);
    CHECK(b.max_contrast == 0.0);
    // shallow ripple on a bump
    std::vector<double> ripple;
    for (int i = 0; i < 2000; ++i) {
        const double x = i * 0.01;
        ripple.push_back(std::exp(-0.02 * (x - 10) * (x - 10)) * (1.0 + 0.02 * std::cos(3.0 * x)));
    }
    auto c = profile_contrast(ripple);
    CHECK(c.n_maxima >= 1);
    CHECK(c.n_contrasted == 0);
    CHECK(c.max_contrast < 0.05);
    CHECK(profile_contrast({1.0, 2.0}).n_maxima == 0);
}

TEST_CASE("summary and table files") {
    const fs::path dir = scratch("files");
    fs::create_directories(dir);
    Summary s;
    s.preset = Preset::Table1;
    s.config = {{"ensemble.seed", "7"}};
    s.checks.push_back({"row1.t_w", 302.47033, 302.6, 4e-4, 5e-3, true});
    s.wall_clock = 1.5;
    write_summary(s, (dir / "summary.txt").string());
    const std::string txt = slurp(dir / "summary.txt");
    CHECK(txt.find("preset=Table1\n") != std::string::npos);
    CHECK(txt.find("status=pass\n") != std::string::npos);
    CHECK(txt.find("config.ensemble.seed=7\n") != std::string::npos);
    CHECK(txt.find("check.row1.t_w.reference=302.47033\n") != std::string::npos);
    CHECK(txt.find("check.row1.t_w.pass=true\n") != std::string::npos);
    CHECK(txt.find("wall_clock_s=1.5\n") != std::string::npos);
    CHECK(s.find("row1.t_w") != nullptr);
    CHECK(s.find("nope") == nullptr);

    FlightTimeReport r{1, 0.5, 1.0, 100.0, 0.01, -0.79964224, 301.59928, 302.71643, 302.47033, 0.01};
    append_table1_csv({r}, (dir / "t.csv").string());
    append_table1_csv({r}, (dir / "t.csv").string());
    const std::string csv = slurp(dir / "t.csv");
    CHECK(csv.rfind("E_i,minus_p_i,z_i,Gamma,z_TP,t_free,t_QM,t_W,t_W_stderr\n0.5,-1,100,0.01,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    fs::remove_all(dir);
}

TEST_CASE("Fig1 and Fig2 presets") {
    const fs::path root = scratch("fig");
    auto s1 = run(Preset::Fig1, {}, root.string());
    CHECK(s1.all_pass());
    REQUIRE(s1.find("threshold_slope") != nullptr);
    CHECK(s1.find("threshold_slope")->achieved == doctest::Approx(-17.626366544).epsilon(1e-8));
    CHECK(s1.find("unitarity_max_dev")->achieved < 1e-12);
    CHECK(fs::exists(root / "Fig1" / "fig1.csv"));
    const std::string first = slurp(root / "Fig1" / "fig1.csv");
    const std::string sum1 = slurp(root / "Fig1" / "summary.txt");
    CHECK(first.rfind("k,re_R,im_R,abs_R\n", 0) == 0);
    run(Preset::Fig1, {}, root.string());
    CHECK(slurp(root / "Fig1" / "fig1.csv") == first);
    CHECK(without_clock(slurp(root / "Fig1" / "summary.txt")) == without_clock(sum1));

    auto s2 = run(Preset::Fig2, {}, root.string());
    CHECK(s2.all_pass());
    CHECK(std::abs(s2.find("z_bf_E5e-5")->achieved - 11.5) < 0.3);
    CHECK(std::abs(s2.find("z_bf_E5e-9")->achieved - 20.7) < 0.3);
    CHECK(fs::exists(root / "Fig2" / "fig2_peaks.csv"));
    fs::remove_all(root);
}

TEST_CASE("Table1 preset at reduced scale") {
    const fs::path root = scratch("table");
    Overrides ov;
    ov.rows = {1};
    ov.n_traj = 100000;
    ov.k_points = 20000;
    ov.k_doubling = false;
    ov.seed = 7;
    auto s = run(Preset::Table1, ov, root.string());
    REQUIRE(s.rows.size() == 1);
    const auto& r = s.rows[0];
    const auto& T = table1_reference()[0];
    CHECK(std::abs(r.z_tp - T.z_tp) < 1e-6);
    CHECK(std::abs(r.t_free / T.t_free - 1.0) < 0.5e-7);
    CHECK(std::abs(r.t_qm / T.t_qm - 1.0) < 5e-3);
    CHECK(std::abs(r.t_w / T.t_w - 1.0) < std::max(5e-3, 5.0 * r.t_w_stderr / T.t_w));
    // stderr at 1e5 is about sqrt(100) times the 1e7 value
    CHECK(r.t_w_stderr > 1e-3);
    CHECK(r.t_free < r.t_w);
    CHECK(r.t_w < r.t_qm);
    const std::string csv = slurp(root / "Table1" / "table1.csv");
    const std::string summary = slurp(root / "Table1" / "summary.txt");
    CHECK(summary.find("config.ensemble.seed=7") != std::string::npos);
    run(Preset::Table1, ov, root.string());
    CHECK(slurp(root / "Table1" / "table1.csv") == csv);
    CHECK(without_clock(slurp(root / "Table1" / "summary.txt")) == without_clock(summary));
    fs::remove_all(root);
}

TEST_CASE("density preset at reduced scale") {
    const fs::path root = scratch("density");
    Overrides ov;
    ov.grid_points = 200;
    ov.k_points = 10000;
    ov.n_traj = 100000;
    auto s = run(Preset::Fig3, ov, root.string());
    for (const char* f : {"density.qtrd", "density_zoom.qtrd", "density_w.qtrd", "density_w_zoom.qtrd", "profile.csv",
                          "markers.csv", "summary.txt"})
        CHECK_MESSAGE(fs::exists(root / "Fig3" / f), f);
    auto d = read_density_qtrd((root / "Fig3" / "density.qtrd").string());
    CHECK(d.nz() == 200);
    CHECK(d.nt() == 200);
    CHECK(s.find("qm_penetration_ratio") != nullptr);
    CHECK(s.find("w_contrast") != nullptr);
    CHECK(s.find("qm_penetration_ratio")->pass);
    fs::remove_all(root);
}

TEST_CASE("failure leaves a marker and a partial summary") {
    const fs::path root = scratch("fail");
    Overrides ov;
    ov.rows = {7};
    CHECK_THROWS_AS(run(Preset::Table1, ov, root.string()), ValidationError);
    CHECK(fs::exists(root / "Table1" / "FAILED"));
    const std::string s = slurp(root / "Table1" / "summary.txt");
    CHECK(s.find("status=FAILED") != std::string::npos);
    CHECK(s.find("error=") != std::string::npos);
    fs::remove_all(root);
}
