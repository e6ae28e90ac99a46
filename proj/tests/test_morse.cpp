#include "qthr/errors.hpp"
#include "qthr/experiments.hpp"
#include "qthr/morse.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace qthr;

TEST_CASE("parameters") {
    MorseParams P;
    CHECK(P.Y() == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(P.omega0() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    MorseParams bad;
    bad.d = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = {};
    bad.m = NAN;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("potential and derivatives") {
    MorseParams P;
    P.V = 1.7;
    P.d = 0.8;
    P.z0 = 0.4;
    CHECK(potential(P, P.z0) == doctest::Approx(-P.V));
    for (double z : {-1.0, 0.0, 0.9, 3.0, 10.0}) {
        const double h = 1e-5;
        CHECK(potential_d1(P, z) ==
              doctest::Approx((potential(P, z + h) - potential(P, z - h)) / (2 * h)).epsilon(1e-7));
        CHECK(potential_d2(P, z) ==
              doctest::Approx((potential_d1(P, z + h) - potential_d1(P, z - h)) / (2 * h)).epsilon(1e-7));
    }
}

TEST_CASE("reflection amplitude frozen values") {
    MorseParams P;
    struct V { double k; cplx r; };
    const V vals[] = {
        {1e-3, {-0.99984467811604357474, -0.017624404756621278233}},
        {0.1, {-0.3981631225496340463, -0.91731462859889305269}},
        {1.0, {-0.99631804197634795535, 0.08573423605780921415}},
        {5.0, {0.97399967324329788302, 0.22654941298080856855}},
    };
    for (const auto& v : vals) CHECK(std::abs(reflection_amplitude(P, v.k).amplitude - v.r) < 1e-11);
    auto r0 = reflection_amplitude(P, 0.0);
    CHECK(r0.limit);
    CHECK(r0.amplitude == cplx(-1.0, 0.0));
}

TEST_CASE("unitarity and symmetry") {
    MorseParams P;
    double worst = 0.0;
    for (int i = 0; i <= 700; ++i) {
        const double k = std::pow(10.0, -6.0 + 7.0 * i / 700.0);
        const cplx r = reflection_amplitude(P, k).amplitude;
        worst = std::max(worst, std::abs(std::abs(r) - 1.0));
        CHECK(std::abs(reflection_amplitude(P, -k).amplitude - std::conj(r)) < 1e-13);
    }
    CHECK(worst < 1e-12);
    // other parameter sets
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.2, 5.0);
    for (int i = 0; i < 100; ++i) {
        MorseParams Q;
        Q.V = u(rng);
        Q.d = u(rng);
        Q.m = u(rng);
        Q.z0 = u(rng) - 2.0;
        const double k = u(rng) * 0.5;
        CHECK(std::abs(std::abs(reflection_amplitude(Q, k).amplitude) - 1.0) < 1e-12);
    }
}

TEST_CASE("z0 shift is a phase") {
    MorseParams P, Q;
    Q.z0 = 1.3;
    for (double k : {0.01, 0.4, 2.0}) {
        const cplx r = reflection_amplitude(P, k).amplitude * std::polar(1.0, -2.0 * k * Q.z0);
        CHECK(std::abs(reflection_amplitude(Q, k).amplitude - r) < 1e-12);
    }
}

TEST_CASE("threshold slope") {
    MorseParams P;
    const double ref = -17.626366544492344562;
    CHECK(threshold_slope_closed_form(P) == doctest::Approx(ref).epsilon(1e-11));
    CHECK(threshold_slope(P) == doctest::Approx(ref).epsilon(1e-6));
    CHECK(std::abs(threshold_slope(P) / -17.626 - 1.0) < 5e-3);
    // Im R / k approaches the slope
    CHECK(reflection_amplitude(P, 1e-7).amplitude.imag() / 1e-7 == doctest::Approx(ref).epsilon(1e-6));
    // the printed small-k bracket is a different number
    CHECK(std::abs(threshold_slope_verbatim(P) - ref) > 1.0);
    // 1% linearity holds up to k ~ 1e-2
    const double w = threshold_linearity_window(P, 0.01);
    CHECK(w > 1e-2 / std::sqrt(10.0));
    CHECK(w < 1e-2 * std::sqrt(10.0));
    const double lin = ref * w * 0.99;
    CHECK(std::abs(reflection_amplitude(P, w * 0.99).amplitude.imag() - lin) <= 0.01 * std::abs(lin));
    CHECK(threshold_linearity_window(P, 0.1) > w);
    // Im R / k flat to 1% over [1e-4, 1e-3]
    const double r1 = reflection_amplitude(P, 1e-4).amplitude.imag() / 1e-4;
    const double r2 = reflection_amplitude(P, 1e-3).amplitude.imag() / 1e-3;
    CHECK(std::abs(r1 / r2 - 1.0) < 0.01);
}

TEST_CASE("turning points") {
    MorseParams P;
    // -ln(1 + sqrt(1 + E)) in extended precision
    const double closed[] = {-0.7996422445006162, -0.6943948432990764, -0.6931596803255767,
                             -0.6931473055599219, -0.6931471818099454};
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& row = table1_reference()[i];
        const double zt = turning_point(P, row.E);
        CHECK(std::abs(zt - closed[i]) < 1e-13);
        CHECK(potential(P, zt) == doctest::Approx(row.E).epsilon(1e-13));
        CHECK(zt < P.z0);
    }
    CHECK(turning_point(P, 0.5) == doctest::Approx(-std::log(1.0 + std::sqrt(1.5))).epsilon(1e-15));
    CHECK_THROWS_AS(turning_point(P, -0.1), DomainError);
    CHECK(classical_momentum(P, 5.0, 0.5) == doctest::Approx(std::sqrt(2.0 * (0.5 - potential(P, 5.0)))));
}

TEST_CASE("badlands function") {
    MorseParams P;
    const double E = 5e-5;
    auto p = [&](double z) { return std::sqrt(2.0 * P.m * (E - potential(P, z))); };
    for (double z : {0.5, 2.0, 8.0, 11.0, 20.0}) {
        const double h = 1e-3;
        const double p0 = p(z), p1 = (p(z + h) - p(z - h)) / (2 * h), p2 = (p(z + h) - 2 * p0 + p(z - h)) / (h * h);
        const double q = 0.75 * p1 * p1 / std::pow(p0, 4) - 0.5 * p2 / std::pow(p0, 3);
        CHECK(badlands(P, z, E) == doctest::Approx(q).epsilon(1e-5));
    }
    struct V { double E, z, q; };
    const V vals[] = {
        {5e-5, 11.4703108889077, 328.205141751559},
        {5e-7, 16.0754572164869, 32821.1215672949},
        {5e-9, 20.6806271638946, 3282112.76412529},
    };
    for (const auto& v : vals) {
        auto pk = badlands_peak(P, v.E);
        CHECK(pk.z_bf == doctest::Approx(v.z).epsilon(1e-7));
        CHECK(pk.q_max == doctest::Approx(v.q).epsilon(1e-9));
    }
    CHECK(std::abs(badlands_peak(P, 5e-5).z_bf - 11.5) < 0.3);
    CHECK(std::abs(badlands_peak(P, 5e-9).z_bf - 20.7) < 0.3);
    CHECK_THROWS_AS(badlands(P, turning_point(P, E) - 0.1, E), DomainError);
}

TEST_CASE("scattering state solves the Schroedinger equation") {
    MorseParams P;
    for (double k : {0.05, 0.5, 2.0}) {
        ScatteringState s(P, k);
        const double E = k * k / 2.0;
        for (double z : {-1.0, 0.0, 1.0, 2.5, 4.0, 8.0}) {
            const double h = 1e-3;
            const cplx f0 = s(z), fp = s(z + h), fm = s(z - h);
            const cplx fpp = s(z + 2 * h), fmm = s(z - 2 * h);
            const cplx d2 = (-fpp + 16.0 * fp - 30.0 * f0 + 16.0 * fm - fmm) / (12.0 * h * h);
            const cplx res = -0.5 * d2 + (potential(P, z) - E) * f0;
            const double scale = std::abs(0.5 * d2) + std::abs(potential(P, z) * f0) + std::abs(E * f0);
            CHECK_MESSAGE(std::abs(res) < 1e-6 * scale, "k=" << k << " z=" << z);
        }
        // asymptotic plane waves far out
        const double zf = 40.0;
        const cplx asym = (std::polar(1.0, -k * zf) + s.R() * std::polar(1.0, k * zf)) / std::sqrt(2.0 * std::numbers::pi);
        CHECK(std::abs(s(zf) - asym) < 1e-8);
        // continuity across the representation switch
        const double zs = -P.d * std::log(ScatteringState::y_switch / P.Y()) + P.z0;
        CHECK(std::abs(s(zs - 1e-9) - s(zs + 1e-9)) < 1e-7 * std::max(1e-30, std::abs(s(zs))));
        // decays under the wall
        CHECK(std::abs(s(-4.0)) < 1e-6);
    }
    CHECK_THROWS_AS(ScatteringState(P, 0.0), DomainError);
}
