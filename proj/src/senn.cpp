#include "qthr/senn.hpp"

#include "qthr/detail/ode.hpp"
#include "qthr/errors.hpp"

#include <boost/math/interpolators/makima.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

namespace qthr {

namespace {

using State4 = std::array<double, 4>;
using State2 = std::array<double, 2>;

constexpr double kAbsTol = 1e-15;
constexpr double kRelTol = 1e-14;

struct Schroedinger {
    const PotentialModel* m;
    double E;
    double coef;
    double lo = -HUGE_VAL, hi = HUGE_VAL;  // current segment; V is sampled strictly inside
    void segment(double a, double b) {
        const double eps = 1e-13 * std::max({1.0, std::abs(a), std::abs(b)});
        lo = std::min(a, b) + eps;
        hi = std::max(a, b) - eps;
    }
    double V(double x) const {
        const double v = m->evaluate(std::clamp(x, lo, hi));
        if (!(std::abs(v) <= m->stiffness_bound))
            throw StiffnessError("potential magnitude exceeds stiffness bound at x=" +
                                 std::to_string(x));
        return v;
    }
};

std::vector<double> segment_points(const PotentialModel& m, double from, double to) {
    std::vector<double> pts{from};
    const double lo = std::min(from, to), hi = std::max(from, to);
    std::vector<double> inner;
    for (double b : m.breakpoints)
        if (b > lo && b < hi) inner.push_back(b);
    std::sort(inner.begin(), inner.end());
    if (from > to) std::reverse(inner.begin(), inner.end());
    pts.insert(pts.end(), inner.begin(), inner.end());
    pts.push_back(to);
    return pts;
}

BoundaryData solve_fundamental(const PotentialModel& model, double k, double tol_scale) {
    Schroedinger S{&model, model.hbar * model.hbar * k * k / (2.0 * model.mass),
                   2.0 * model.mass / (model.hbar * model.hbar)};
    auto sys = [&](const State4& x, State4& dx, double t) {
        const double f = S.coef * (S.V(t) - S.E);
        dx[0] = x[1];
        dx[1] = f * x[0];
        dx[2] = x[3];
        dx[3] = f * x[2];
    };
    State4 x{1.0, 0.0, 0.0, 1.0};  // u, u', v, v'
    double drift = 0.0;
    auto obs = [&](const State4& s, double) {
        drift = std::max(drift, std::abs(s[0] * s[3] - s[1] * s[2] - 1.0));
        return true;
    };
    const auto pts = segment_points(model, -model.xi, model.xi);
    double dt = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        S.segment(pts[i], pts[i + 1]);
        dt = detail::integrate_segment(sys, x, pts[i], pts[i + 1], kAbsTol * tol_scale,
                                       kRelTol * tol_scale, obs, dt);
    }
    return {x[3], x[0], -x[2], x[1], k, drift};
}

} // namespace

void PotentialModel::validate() const {
    if (!evaluate) throw ValidationError("potential: no evaluator");
    if (!(xi > 0.0) || !std::isfinite(xi)) throw ValidationError("potential: xi must be positive");
    if (!(mass > 0.0) || !(hbar > 0.0)) throw ValidationError("potential: mass and hbar must be positive");
    if (!(support_tol > 0.0)) throw ValidationError("potential: support_tol must be positive");
    if (std::abs(evaluate(-xi)) > support_tol)
        throw ValidationError("potential: |V(-xi)| exceeds support_tol");
    if (topology == Topology::TwoSided && std::abs(evaluate(xi)) > support_tol)
        throw ValidationError("potential: |V(xi)| exceeds support_tol");
}

BoundaryData fundamental_solutions(const PotentialModel& model, double k) {
    model.validate();
    if (!(k >= 0.0) || !std::isfinite(k)) throw DomainError("fundamental_solutions: k must be >= 0");
    BoundaryData bd = solve_fundamental(model, k, 1.0);
    if (bd.max_wronskian_drift > 1e-10) bd = solve_fundamental(model, k, 1e-2);
    if (bd.max_wronskian_drift > 1e-10)
        throw IntegrationError("fundamental_solutions: Wronskian drift " +
                               std::to_string(bd.max_wronskian_drift));
    return bd;
}

cplx reflection_amplitude_general(const PotentialModel& model, double k) {
    if (model.topology != Topology::TwoSided)
        throw ValidationError("reflection_amplitude_general: requires a two-sided potential");
    if (!(k > 0.0)) throw DomainError("reflection_amplitude_general: k must be positive");
    const BoundaryData b = fundamental_solutions(model, k);
    const cplx num(k * (b.p - b.q), b.s * k * k - b.w);
    const cplx den(k * (b.p + b.q), b.s * k * k + b.w);
    if (std::abs(den) < 1e-300) throw DegenerateError("reflection_amplitude_general: zero denominator");
    return std::polar(1.0, 2.0 * k * model.xi) * num / den;
}

double reflection_probability(const PotentialModel& model, double k) {
    if (model.topology != Topology::TwoSided)
        throw ValidationError("reflection_probability: requires a two-sided potential");
    if (!(k > 0.0)) throw DomainError("reflection_probability: k must be positive");
    const BoundaryData b = fundamental_solutions(model, k);
    const double k2 = k * k;
    const double num = b.w * b.w + k2 * ((b.p - b.q) * (b.p - b.q) - 2.0 * b.s * b.w) +
                       b.s * b.s * k2 * k2;
    const double den = b.w * b.w + k2 * ((b.p + b.q) * (b.p + b.q) + 2.0 * b.s * b.w) +
                       b.s * b.s * k2 * k2;
    if (std::abs(den) < 1e-300) throw DegenerateError("reflection_probability: zero denominator");
    return num / den;
}

cplx transmission_amplitude(const PotentialModel& model, double k) {
    if (model.topology != Topology::TwoSided)
        throw ValidationError("transmission_amplitude: requires a two-sided potential");
    if (!(k > 0.0)) throw DomainError("transmission_amplitude: k must be positive");
    const BoundaryData b = fundamental_solutions(model, k);
    const cplx den(k * (b.p + b.q), b.s * k * k + b.w);
    if (std::abs(den) < 1e-300) throw DegenerateError("transmission_amplitude: zero denominator");
    const cplx R = std::polar(1.0, 2.0 * k * model.xi) * cplx(k * (b.p - b.q), b.s * k * k - b.w) / den;
    const cplx ep = std::polar(1.0, k * model.xi);
    const cplx a = ep + R * std::conj(ep);
    const cplx bb = cplx(0.0, k) * (ep - R * std::conj(ep));
    return (a * b.q - bb * b.s) * std::conj(ep);
}

cplx reflection_origin(cplx r, double k, double xi) { return r * std::polar(1.0, -4.0 * k * xi); }

cplx transmission_origin(cplx t, double k, double xi) { return t * std::polar(1.0, -2.0 * k * xi); }

WallData wall_solution(const PotentialModel& model, double k) {
    model.validate();
    if (model.topology != Topology::RightWall)
        throw ValidationError("wall_solution: requires a right-wall potential");
    const double E = model.hbar * model.hbar * k * k / (2.0 * model.mass);
    const double coef = 2.0 * model.mass / (model.hbar * model.hbar);
    auto kappa = [&](double x) {
        const double d = model.evaluate(x) - E;
        return d > 0.0 ? std::sqrt(coef * d) : 0.0;
    };

    const double dx = model.xi / 2000.0;
    const long max_scan = 2000000;
    double x = -model.xi, action = 0.0, x_deep = 0.0;
    bool found = false;
    for (long i = 0; i < max_scan; ++i) {
        const double v = model.evaluate(x);
        if (!(std::abs(v) <= model.stiffness_bound)) break;
        if (v >= 50.0 * E && action >= 18.0 && v > E) {
            x_deep = x;
            found = true;
            break;
        }
        const double xn = x + dx;
        if (model.evaluate(xn) > E)
            action += 0.5 * (kappa(x) + kappa(xn)) * dx;
        else
            action = 0.0;
        x = xn;
    }
    if (!found)
        throw DecaySelectionError("wall_solution: no deep forbidden point within stiffness bound");

    Schroedinger S{&model, E, coef};
    auto sys = [&](const State2& s, State2& ds, double t) {
        ds[0] = s[1];
        ds[1] = S.coef * (S.V(t) - S.E) * s[0];
    };
    State2 phi{1.0, -kappa(x_deep)};
    auto obs = [](const State2&, double) { return true; };
    const auto pts = segment_points(model, x_deep, -model.xi);
    double dt = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        S.segment(pts[i], pts[i + 1]);
        dt = detail::integrate_segment(sys, phi, pts[i], pts[i + 1], 1e-300, 1e-13, obs, dt);
    }
    const double n = std::hypot(phi[0], phi[1]);
    if (!(n > 0.0) || !std::isfinite(n))
        throw DecaySelectionError("wall_solution: interior solution cannot be normalized");
    return {phi[1] / n, phi[0] / n, x_deep};
}

cplx reflection_amplitude_wall(const PotentialModel& model, double k) {
    if (!(k > 0.0)) throw DomainError("reflection_amplitude_wall: k must be positive");
    const WallData w = wall_solution(model, k);
    const cplx num(k * w.s_eff, w.q_eff);
    const cplx den(k * w.s_eff, -w.q_eff);
    if (std::abs(den) < 1e-300) throw DegenerateError("reflection_amplitude_wall: zero denominator");
    return std::polar(1.0, 2.0 * k * model.xi) * num / den;
}

ThresholdLimit threshold_limit(const PotentialModel& model) {
    const std::array<double, 3> ks{1e-3, 5e-4, 2.5e-4};
    std::array<BoundaryData, 3> b;
    for (int i = 0; i < 3; ++i) b[i] = fundamental_solutions(model, ks[i]);
    const BoundaryData b0 = fundamental_solutions(model, 0.0);
    auto rich = [&](auto get) {
        const double a1 = (4.0 * get(b[1]) - get(b[0])) / 3.0;
        const double a2 = (4.0 * get(b[2]) - get(b[1])) / 3.0;
        return (16.0 * a2 - a1) / 15.0;
    };
    ThresholdLimit t{};
    t.p = rich([](const BoundaryData& d) { return d.p; });
    t.q = rich([](const BoundaryData& d) { return d.q; });
    t.s = rich([](const BoundaryData& d) { return d.s; });
    t.w = rich([](const BoundaryData& d) { return d.w; });
    t.w_error = std::abs(t.w - b0.w);
    auto r2 = [](double p, double q) { return (p - q) * (p - q) / ((p + q) * (p + q)); };
    t.r2_resonant = r2(t.p, t.q);
    t.r2_error = std::abs(t.r2_resonant - r2(b0.p, b0.q));
    return t;
}

void auto_support(PotentialModel& model, double scale) {
    model.support_tol = 1e-12 * scale;
    for (int i = 0; i < 2000; ++i) {
        const bool left = std::abs(model.evaluate(-model.xi)) < model.support_tol;
        const bool right = model.topology == Topology::RightWall ||
                           std::abs(model.evaluate(model.xi)) < model.support_tol;
        if (left && right) return;
        model.xi *= 1.05;
    }
    throw ValidationError("auto_support: potential does not decay");
}

PotentialModel square_well(double V0, double a) {
    if (!(a > 0.0)) throw ValidationError("square_well: a must be positive");
    PotentialModel m;
    m.evaluate = [V0, a](double x) { return std::abs(x) < a ? -V0 : 0.0; };
    m.xi = a;
    m.name = "square_well";
    m.support_tol = 1e-12 * std::max(1.0, std::abs(V0));
    return m;
}

PotentialModel square_barrier(double V0, double a) {
    PotentialModel m = square_well(-V0, a);
    m.name = "square_barrier";
    return m;
}

PotentialModel two_step_well(double V1, double V2, double a) {
    if (!(a > 0.0)) throw ValidationError("two_step_well: a must be positive");
    PotentialModel m;
    m.evaluate = [V1, V2, a](double x) {
        if (x <= -a || x >= a) return 0.0;
        return x < 0.0 ? -V1 : -V2;
    };
    m.xi = a;
    m.breakpoints = {0.0};
    m.name = "two_step_well";
    m.support_tol = 1e-12 * std::max({1.0, std::abs(V1), std::abs(V2)});
    return m;
}

PotentialModel gaussian_well(double V0, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("gaussian_well: sigma must be positive");
    PotentialModel m;
    m.evaluate = [V0, sigma](double x) { return -V0 * std::exp(-0.5 * x * x / (sigma * sigma)); };
    m.xi = sigma;
    m.name = "gaussian_well";
    auto_support(m, std::max(1e-300, std::abs(V0)));
    return m;
}

PotentialModel morse_wall(const MorseParams& P) {
    P.validate();
    PotentialModel m;
    m.evaluate = [P](double x) { return potential(P, -x); };
    m.xi = P.d;
    m.topology = Topology::RightWall;
    m.mass = P.m;
    m.hbar = P.hbar;
    m.name = "morse";
    auto_support(m, P.V);
    return m;
}

PotentialModel tabulated_potential(std::vector<double> x, std::vector<double> v, Topology topo) {
    if (x.size() != v.size() || x.size() < 4)
        throw ValidationError("tabulated potential: need at least 4 (x, V) pairs");
    for (size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw ValidationError("tabulated potential: x must increase");
    const double x0 = x.front(), x1 = x.back(), v0 = v.front(), v1 = v.back();
    double scale = 0.0;
    for (double e : v) scale = std::max(scale, std::abs(e));
    using Interp = boost::math::interpolators::makima<std::vector<double>>;
    auto f = std::make_shared<Interp>(std::move(x), std::move(v));
    PotentialModel m;
    m.evaluate = [f, x0, x1, v0, v1](double t) {
        if (t <= x0) return v0;
        if (t >= x1) return v1;
        return (*f)(t);
    };
    m.topology = topo;
    m.xi = topo == Topology::TwoSided ? std::max(-x0, x1) : -x0;
    if (!(m.xi > 0.0)) throw ValidationError("tabulated potential: table must straddle x = 0");
    m.support_tol = 1e-12 * std::max(1.0, scale);
    m.name = "tabulated";
    return m;
}

PotentialModel load_tabulated_potential(const std::string& path, Topology topo) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open potential file: " + path);
    std::vector<double> x, v;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a)) continue;
        if (!(ls >> b)) throw ValidationError("potential file: malformed line: " + line);
        x.push_back(a);
        v.push_back(b);
    }
    return tabulated_potential(std::move(x), std::move(v), topo);
}

} // namespace qthr
