#pragma once

#include "qthr/errors.hpp"

#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include <cmath>

namespace qthr::detail {

template <class State>
using rkf78_controlled = boost::numeric::odeint::controlled_runge_kutta<
    boost::numeric::odeint::runge_kutta_fehlberg78<State>>;

/// Adaptive RKF7(8) integration of x from t0 to t1 (either direction).
/// obs(x, t) is called after every accepted step; returning false stops early.
template <class State, class Sys, class Obs>
double integrate_segment(Sys&& sys, State& x, double t0, double t1, double abs_tol,
                         double rel_tol, Obs&& obs, double dt0 = 0.0, long max_steps = 2000000) {
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(abs_tol, rel_tol, ode::runge_kutta_fehlberg78<State>());
    const double span = t1 - t0;
    if (span == 0.0) return 0.0;
    const double dir = span > 0 ? 1.0 : -1.0;
    double dt = dt0 != 0.0 ? dir * std::abs(dt0) : span / 64.0;
    double t = t0;
    long steps = 0;
    while (dir * (t1 - t) > 0.0) {
        if (dir * (t + dt - t1) > 0.0) dt = t1 - t;
        const double t_prev = t;
        auto res = stepper.try_step(sys, x, t, dt);
        if (res == ode::success) {
            if (dir * (t1 - t) < 1e-15 * std::abs(span)) t = t1;
            if (!obs(x, t)) return dt;
        } else if (std::abs(dt) < 1e-15 * std::max(std::abs(span), std::abs(t_prev))) {
            throw IntegrationError("step size underflow");
        }
        if (++steps > max_steps) throw IntegrationError("too many steps");
    }
    return dt;
}

} // namespace qthr::detail
