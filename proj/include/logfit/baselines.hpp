#pragma once

// Gradient-descent comparators on the single-sigmoid target
//     g(t, a, c) = c / (1 + exp(-a t + b)),   b fixed.
// Only (a, c) are optimized; b stays fixed at 2.944.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "logfit/core_model.hpp"
#include "logfit/errors.hpp"
#include "logfit/integrator.hpp"

namespace logfit {

struct ScalarSigmoidTarget {
    double alpha_true = 2.0 / 3.0;
    double c_true = 2.0;
    double b_fixed = 2.944;
    double horizon = 9.0;  ///< batch cost integrates over [0, horizon]

    double g(double t, double a, double c) const noexcept { return c * sigmoid(a * t - b_fixed); }
    double g_true(double t) const noexcept { return g(t, alpha_true, c_true); }

    /// dg/da = c t f'(a t - b)
    double dg_da(double t, double a, double c) const noexcept { return c * t * sigmoid_slope(a * t - b_fixed); }
    /// dg/dc = f(a t - b)
    double dg_dc(double t, double a) const noexcept { return sigmoid(a * t - b_fixed); }

    void validate() const {
        if (!(horizon > 0.0)) throw ValidationError("target.horizon", "must be positive");
        if (!std::isfinite(b_fixed)) throw ValidationError("target.b_fixed", "must be finite");
    }
};

struct ParamRates {
    double da = 0.0;
    double dc = 0.0;
};

/// Pattern-by-pattern flow: descend e(t)^2 / 2 at the current sample time.
inline ParamRates pattern_gradient_rhs(double a_hat, double c_hat, double t, const ScalarSigmoidTarget& target,
                                       double rate) noexcept {
    const double e = target.g(t, a_hat, c_hat) - target.g_true(t);
    return {-rate * e * target.dg_da(t, a_hat, c_hat), -rate * e * target.dg_dc(t, a_hat)};
}

/// J(a, c) = int_0^H (g(t,a,c) - g(t,a*,c*))^2 dt by the trapezoid rule on quad_n intervals.
inline double batch_cost(double a_hat, double c_hat, const ScalarSigmoidTarget& target, int quad_n = 900) {
    if (quad_n < 2) throw ValidationError("quad_n", "need at least 2 intervals");
    const double h = target.horizon / quad_n;
    double j = 0.0;
    for (int k = 0; k <= quad_n; ++k) {
        const double t = k * h;
        const double e = target.g(t, a_hat, c_hat) - target.g_true(t);
        j += (k == 0 || k == quad_n ? 0.5 : 1.0) * e * e;
    }
    return j * h;
}

/// Gradient of the quadrature J, differentiated node by node.
inline ParamRates batch_cost_gradient(double a_hat, double c_hat, const ScalarSigmoidTarget& target,
                                      int quad_n = 900) {
    if (quad_n < 2) throw ValidationError("quad_n", "need at least 2 intervals");
    const double h = target.horizon / quad_n;
    ParamRates grad;
    for (int k = 0; k <= quad_n; ++k) {
        const double t = k * h;
        const double w = (k == 0 || k == quad_n ? 0.5 : 1.0) * h;
        const double e = target.g(t, a_hat, c_hat) - target.g_true(t);
        grad.da += w * 2.0 * e * target.dg_da(t, a_hat, c_hat);
        grad.dc += w * 2.0 * e * target.dg_dc(t, a_hat);
    }
    return grad;
}

inline ParamRates batch_gradient_rhs(double a_hat, double c_hat, const ScalarSigmoidTarget& target, double rate,
                                     int quad_n = 900) {
    const ParamRates g = batch_cost_gradient(a_hat, c_hat, target, quad_n);
    return {-rate * g.da, -rate * g.dc};
}

enum class Flow { pattern, batch };

struct BaselineSample {
    double t = 0.0;
    double a = 0.0;
    double c = 0.0;
    double J = 0.0;
};

/// Euler-integrates the chosen flow from (a0, c0) to t_end. The pattern
/// flow sees the clock folded periodically into [0, horizon).
inline std::vector<BaselineSample> run_baseline(Flow flow, std::pair<double, double> init, double rate, double t_end,
                                                const IntegratorConfig& icfg, std::int64_t stride = 1000,
                                                const ScalarSigmoidTarget& target = {}, int quad_n = 900) {
    icfg.validate();
    target.validate();
    if (!std::isfinite(init.first) || !std::isfinite(init.second)) {
        throw ValidationError("init", "initial point must be finite");
    }
    const auto steps = static_cast<std::int64_t>(std::llround(t_end / icfg.dt));
    double a = init.first;
    double c = init.second;
    std::vector<BaselineSample> out;
    out.push_back({0.0, a, c, batch_cost(a, c, target, quad_n)});
    for (std::int64_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * icfg.dt;
        const ParamRates r = flow == Flow::pattern
                                 ? pattern_gradient_rhs(a, c, std::fmod(t, target.horizon), target, rate)
                                 : batch_gradient_rhs(a, c, target, rate, quad_n);
        a += icfg.dt * r.da;
        c += icfg.dt * r.dc;
        const double t_next = static_cast<double>(k + 1) * icfg.dt;
        if (!std::isfinite(a) || !std::isfinite(c)) throw DivergenceError(t_next, "baseline parameters");
        if ((k + 1) % stride == 0 || k + 1 == steps) {
            out.push_back({t_next, a, c, batch_cost(a, c, target, quad_n)});
        }
    }
    return out;
}

}  // namespace logfit
