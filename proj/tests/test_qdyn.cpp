#include "qthr/errors.hpp"
#include "qthr/experiments.hpp"
#include "qthr/qdyn.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

using namespace qthr;

namespace {

const double pi = std::numbers::pi;

// free spreading of the packet density
double free_density(const CoherentState& s, double z, double t) {
    const double w = 1.0 + std::pow(s.gamma * t, 2);
    const double zc = s.z_i - s.p_i * t;
    return std::sqrt(s.gamma / (pi * w)) * std::exp(-s.gamma * (z - zc) * (z - zc) / w);
}

} // namespace

TEST_CASE("coherent state") {
    CoherentState s{100.0, 1.0, 1e-2};
    double norm = 0.0, mean = 0.0;
    const double h = 0.01;
    for (double z = 0.0; z <= 200.0; z += h) {
        norm += s.density(z) * h;
        mean += z * s.density(z) * h;
        CHECK(std::norm(s.amplitude(z)) == doctest::Approx(s.density(z)).epsilon(1e-13).scale(1e-300));
    }
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(mean == doctest::Approx(100.0).epsilon(1e-10));
    // incoming: phase decreases with z at rate p_i
    const cplx a = s.amplitude(100.0), b = s.amplitude(100.001);
    CHECK(std::arg(b / a) == doctest::Approx(-0.001).epsilon(1e-9));
    CHECK(s.energy() == 0.5);
    CHECK_THROWS_AS((CoherentState{100.0, -1.0, 1e-2}.validate()), ValidationError);
    CHECK_THROWS_AS((CoherentState{100.0, 1.0, 0.0}.validate()), ValidationError);
}

TEST_CASE("k grid nodes") {
    MorseParams P;
    CoherentState s{100.0, 1.0, 1e-2};
    auto kg = KGrid::for_state(P, s, 101);
    CHECK(kg.k_min == doctest::Approx(0.3));
    CHECK(kg.k_max == doctest::Approx(1.7));
    std::vector<double> k, w;
    kg.nodes(k, w);
    CHECK(k.size() == 101);
    double sw = 0.0;
    for (double x : w) sw += x;
    CHECK(sw == doctest::Approx(1.4).epsilon(1e-14));
    kg.rule = KRule::GaussLegendre;
    kg.n = 20;
    kg.nodes(k, w);
    double m3 = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) m3 += w[i] * std::pow(k[i], 9);
    CHECK(m3 == doctest::Approx((std::pow(1.7, 10) - std::pow(0.3, 10)) / 10.0).epsilon(1e-13));
    CHECK_THROWS_AS((KGrid{1.0, 0.5, 10}.validate()), ValidationError);
    CHECK_THROWS_AS((KGrid{0.0, 1.0, 1}.validate()), ValidationError);
}

TEST_CASE("overlap against direct quadrature") {
    MorseParams P;
    CoherentState s{100.0, 1.0, 1e-2};
    for (double k : {0.9, 1.0, 1.07, -1.0}) {
        const double kk = std::abs(k);
        cplx R = reflection_amplitude(P, kk).amplitude;
        if (k < 0) R = std::conj(R);
        cplx sum = 0.0;
        const double h = 0.005;
        for (double z = 30.0; z <= 170.0; z += h) {
            const cplx psi = (std::polar(1.0, -k * z) + R * std::polar(1.0, k * z)) / std::sqrt(2.0 * pi);
            sum += std::conj(psi) * s.amplitude(z) * h;
        }
        CHECK(std::abs(overlap_k(P, s, k) - sum) < 1e-10);
    }
    CoherentState near{5.0, 1.0, 1e-2};
    CHECK_THROWS_AS(overlap_k(P, near, 1.0), AsymptoticsViolation);
}

TEST_CASE("propagated density: free motion before the bounce, norm after") {
    MorseParams P;
    CoherentState s{100.0, 1.0, 1e-2};
    auto kg = KGrid::for_state(P, s, 20000);
    std::vector<double> z = linspace(0.0, 260.0, 1301);
    std::vector<double> t{0.0, 30.0, 210.0};
    auto r = propagate(P, s, kg, z, t);
    CHECK(r.self_test_error < 1e-6);
    double peak = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) peak = std::max(peak, free_density(s, z[i], 30.0));
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(std::abs(r.density.at(i, 0) - s.density(z[i])) < 1e-8 * peak);
        CHECK(std::abs(r.density.at(i, 1) - free_density(s, z[i], 30.0)) < 1e-6 * peak);
    }
    // after reflection the outgoing packet carries the full norm
    double norm = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) norm += r.density.at(i, 2) * (z[1] - z[0]);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.density.provenance == Provenance::Quantum);
}

TEST_CASE("correlation series matches pointwise evaluation") {
    MorseParams P;
    CoherentState s{100.0, 1.0, 1e-2};
    auto kg = KGrid::for_state(P, s);
    std::vector<double> t{250.0, 300.0, 330.0};
    auto c = correlation_series(P, s, kg, 200.0, t);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(c[i] == doctest::Approx(correlation_at(P, s, 200.0, t[i])).epsilon(1e-12));
    auto c2 = correlation_series(P, s, kg, 200.0, t, 1);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(c[i] == c2[i]);
}

TEST_CASE("quantum mean flight time, row 1") {
    MorseParams P;
    const auto& row = table1_reference()[0];
    CoherentState s{row.z_i, row.p_i, row.gamma};
    const double y = 2.0 * row.z_i;
    auto kg = KGrid::for_state(P, s, 20000);
    auto r = mean_flight_time_qm(P, s, y, 0.0, 2.0 * row.t_free, kg);
    CHECK(std::abs(r.mean / row.t_qm - 1.0) < 1e-6);
    // integral of C_t is <1/p> over the momentum spread
    const double v2 = 0.5 * row.gamma / (row.p_i * row.p_i);
    CHECK(r.normalization == doctest::Approx((1.0 + v2 + 3.0 * v2 * v2) / row.p_i).epsilon(1e-5));
    CHECK(r.tail_fraction < 1e-6);
    CHECK(r.mean > row.t_free);
    // a window missing the peak grows until it covers it
    auto r2 = mean_flight_time_qm(P, s, y, 0.0, 0.9 * row.t_free, kg);
    CHECK(r2.extensions > 0);
    CHECK(r2.mean == doctest::Approx(r.mean).epsilon(1e-6));
    CHECK_THROWS_AS(mean_flight_time_qm(P, s, y, 10.0, 5.0, kg), ValidationError);
}

TEST_CASE("qtrd and csv output") {
    SpaceTimeDensity d;
    d.z_axis = linspace(-1.0, 2.0, 7);
    d.t_axis = linspace(0.0, 1.0, 5);
    d.values.resize(35);
    for (std::size_t i = 0; i < 35; ++i) d.values[i] = std::sin(0.1 * i) * 1e-7 + 1.0 / 3.0;
    d.provenance = Provenance::Wigner;
    write_density_qtrd(d, "test_qdyn.qtrd");
    auto e = read_density_qtrd("test_qdyn.qtrd");
    CHECK(e.z_axis == d.z_axis);
    CHECK(e.t_axis == d.t_axis);
    CHECK(e.values == d.values);
    std::remove("test_qdyn.qtrd");
    write_density_csv(d, "test_qdyn.csv");
    std::ifstream f("test_qdyn.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header.find(',') != std::string::npos);
    int lines = 0;
    std::string l;
    while (std::getline(f, l)) {
        ++lines;
        CHECK(std::count(l.begin(), l.end(), ',') == 5);
    }
    CHECK(lines == 7);
    std::remove("test_qdyn.csv");
    CHECK_THROWS_AS(read_density_qtrd("no/such.qtrd"), Error);
    SpaceTimeDensity bad = d;
    bad.values.pop_back();
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}
