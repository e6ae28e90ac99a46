#include "qthr/cli.hpp"
#include "qthr/errors.hpp"
#include "qthr/runconfig.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace qthr;
namespace fs = std::filesystem;

namespace {

struct Out {
    int code;
    std::string out, err;
};

Out cli(std::vector<std::string> args) {
    args.insert(args.begin(), "qthreshold");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int c = cli_main(static_cast<int>(argv.size()), argv.data(), o, e);
    return {c, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream f(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        std::vector<std::string> r;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) r.push_back(cell);
        rows.push_back(r);
    }
    return rows;
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("qthr_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("format_exact round trips") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::pow(10.0, u(rng)) * (i % 2 ? -1.0 : 1.0);
        CHECK(std::stod(format_exact(v)) == v);
    }
    CHECK(format_exact(0.5) == "0.5");
}

TEST_CASE("config text round trip") {
    RunConfig a;
    a.morse.V = 1.3;
    a.morse.d = 0.7;
    a.state.gamma = 1.0 / 3.0;
    a.ensemble.seed = 99;
    a.ensemble.sampling = Sampling::Plain;
    a.senn_k = {0.1, 0.2, 1.0 / 7.0};
    a.flight_rows = {1, 3};
    const auto& sec = command_sections("wigner");
    const std::string text = to_config_text(a, sec);
    RunConfig b;
    apply_config_text(b, text, sec);
    CHECK(to_config_text(b, sec) == text);
    CHECK(b.morse.V == 1.3);
    CHECK(b.state.gamma == 1.0 / 3.0);
    CHECK(b.ensemble.seed == 99);
    CHECK(b.flight_rows.empty());
    // every key round trips through its own text
    for (const auto& k : config_keys()) {
        RunConfig c;
        const std::string v = k.get(a);
        k.set(c, v);
        CHECK_MESSAGE(k.get(c) == v, k.qualified());
        CHECK(find_key(k.qualified()) != nullptr);
        CHECK(k.flag().rfind("--", 0) == 0);
        CHECK(k.flag().find('_') == std::string::npos);
    }
}

TEST_CASE("config rejects unknown keys and bad values") {
    RunConfig c;
    CHECK_THROWS_AS(apply_config_text(c, "[morse]\nV=1\nbogus=2\n"), ValidationError);
    try {
        apply_config_text(c, "[morse]\nbogus=2\n");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("morse.bogus") != std::string::npos);
    }
    CHECK_THROWS_AS(apply_config_text(c, "[nosuch]\nx=1\n"), ValidationError);
    CHECK_THROWS_AS(apply_config_text(c, "[senn]\nV0=1\n", {"run", "morse"}), ValidationError);
    CHECK_THROWS_AS(set_key(c, "morse.V", "-1"), ValidationError);
    CHECK_THROWS_AS(set_key(c, "morse.V", "abc"), ValidationError);
    CHECK_THROWS_AS(set_key(c, "state.p_i", "0"), ValidationError);
    CHECK_THROWS_AS(set_key(c, "ensemble.sampling", "quasi"), ValidationError);
    CHECK_THROWS_AS(set_key(c, "no.key", "1"), ValidationError);
    try {
        set_key(c, "morse.d", "0");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("morse.d") != std::string::npos);
    }
    CHECK(find_key("morse.nope") == nullptr);
}

TEST_CASE("usage errors exit 1") {
    CHECK(cli({}).code == 1);
    auto r = cli({"reflect", "--no-such-flag", "1"});
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
    r = cli({"reflect", "--V", "-2", "--out-dir", scratch("bad").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("morse.V") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    CHECK(cli({"nosuch"}).code == 1);
    CHECK(cli({"reflect", "--config", "no/such/file.ini"}).code == 1);
    fs::remove_all(scratch("bad"));
}

TEST_CASE("reflect sweep") {
    const fs::path dir = scratch("reflect");
    auto r = cli({"reflect", "--k-min", "1e-4", "--k-max", "1e-2", "--n", "100", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    auto rows = read_csv(dir / "reflect" / "reflect.csv");
    REQUIRE(rows.size() == 101);
    CHECK(rows[0] == std::vector<std::string>{"k", "re_R", "im_R", "abs_R"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(std::abs(std::stod(rows[i][3]) - 1.0) <= 1e-12);
        const double re = std::stod(rows[i][1]), im = std::stod(rows[i][2]);
        CHECK(std::hypot(re, im) == doctest::Approx(1.0).epsilon(1e-8));
    }
    CHECK(std::stod(rows[1][0]) == doctest::Approx(1e-4));
    CHECK(std::stod(rows[100][0]) == doctest::Approx(1e-2));
    const std::string csv = slurp(dir / "reflect" / "reflect.csv");
    CHECK(csv.find('\r') == std::string::npos);

    // the emitted config reproduces the run
    const fs::path dir2 = scratch("reflect2");
    fs::create_directories(dir2);
    fs::copy_file(dir / "reflect" / "config.ini", dir2 / "in.ini");
    r = cli({"reflect", "--config", (dir2 / "in.ini").string(), "--out-dir", dir2.string()});
    REQUIRE(r.code == 0);
    CHECK(slurp(dir2 / "reflect" / "reflect.csv") == csv);
    // flags override the file
    r = cli({"reflect", "--config", (dir2 / "in.ini").string(), "--n", "7", "--out-dir", dir2.string()});
    CHECK(read_csv(dir2 / "reflect" / "reflect.csv").size() == 8);
    // keys from another command's section are refused
    std::ofstream(dir2 / "bad.ini") << "[senn]\nV0=2\n";
    CHECK(cli({"reflect", "--config", (dir2 / "bad.ini").string()}).code == 1);
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("output root from the environment") {
    const fs::path dir = scratch("env");
    ::setenv("QTHRESHOLD_OUT", dir.string().c_str(), 1);
    auto r = cli({"reflect", "--n", "3", "--out-dir", "ignored_dir"});
    ::unsetenv("QTHRESHOLD_OUT");
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "reflect" / "reflect.csv"));
    CHECK_FALSE(fs::exists("ignored_dir"));
    fs::remove_all(dir);
}

TEST_CASE("senn and badlands") {
    const fs::path dir = scratch("senn");
    auto r = cli({"senn", "--potential", "square_barrier", "--V0", "1", "--a", "1", "--k", "0.5", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    auto rows = read_csv(dir / "senn" / "senn.csv");
    REQUIRE(rows.size() == 2);
    std::size_t iR = 0, iT = 0;
    for (std::size_t j = 0; j < rows[0].size(); ++j) {
        if (rows[0][j] == "abs_R2") iR = j;
        if (rows[0][j] == "abs_T2") iT = j;
    }
    REQUIRE(iR > 0);
    REQUIRE(iT > 0);
    CHECK(std::abs(std::stod(rows[1][iR]) + std::stod(rows[1][iT]) - 1.0) < 1e-8);

    r = cli({"badlands", "--energies", "5e-5,5e-9", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    auto pk = read_csv(dir / "badlands" / "peaks.csv");
    REQUIRE(pk.size() == 3);
    CHECK(pk[0][2] == "z_bf");
    CHECK(std::abs(std::stod(pk[1][2]) - 11.5) < 0.3);
    CHECK(std::abs(std::stod(pk[2][2]) - 20.7) < 0.3);
    fs::remove_all(dir);
}

TEST_CASE("numerical failure exits 2") {
    const fs::path dir = scratch("num");
    auto r = cli({"wigner", "--energy-tolerance", "1e-300", "--n-traj", "1000", "--nz", "10", "--nt", "10", "--out-dir",
                  dir.string()});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
    fs::remove_all(dir);
}

TEST_CASE("densities and flight times") {
    const fs::path dir = scratch("dyn");
    auto r = cli({"propagate", "--nz", "50", "--nt", "20", "--k-points", "5000", "--format", "both", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "propagate" / "density.qtrd"));
    CHECK(fs::exists(dir / "propagate" / "density.csv"));
    r = cli({"wigner", "--nz", "50", "--nt", "20", "--n-traj", "10000", "--threads", "2", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    auto d = read_density_qtrd((dir / "wigner" / "density.qtrd").string());
    CHECK(d.nz() == 50);
    CHECK(d.nt() == 20);

    r = cli({"flight-times", "--row", "1", "--n-traj", "100000", "--seed", "7", "--k-points", "20000", "--out-dir",
             dir.string()});
    REQUIRE(r.code == 0);
    auto rows = read_csv(dir / "flight-times" / "flight_times.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][0] == "E_i");
    CHECK(std::stod(rows[1][6]) == doctest::Approx(302.71643).epsilon(5e-3));
    CHECK(std::stod(rows[1][7]) == doctest::Approx(302.47033).epsilon(5e-3));
    fs::remove_all(dir);
}
