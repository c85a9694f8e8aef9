#pragma once

// Fixed-step time stepping. Explicit Euler is the production method;
// classical RK4 serves as the verification oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logfit/core_model.hpp"
#include "logfit/dynamics.hpp"
#include "logfit/errors.hpp"

namespace logfit {

enum class Method { euler, rk4 };

struct IntegratorConfig {
    double dt = 1e-4;
    Method method = Method::euler;

    void validate() const {
        if (!(dt > 0.0 && std::isfinite(dt))) throw ValidationError("integrator.dt", "must be positive");
    }
};

namespace detail {

inline std::int64_t grid_steps(double span, double dt, const char* field) {
    const double ratio = span / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * std::max(1.0, rounded)) {
        throw ValidationError(field, "grid alignment requires " + std::string(field) + "/dt to be an integer (got " +
                                         std::to_string(ratio) + ")");
    }
    return static_cast<std::int64_t>(rounded);
}

inline void check_finite(std::span<const double> v, double t, const char* what) {
    double acc = 0.0;
    for (double x : v) acc += x;
    if (!std::isfinite(acc)) throw DivergenceError(t, std::string(what) + " became non-finite");
}

}  // namespace detail

/// Reset windows expressed in whole steps. Construction validates that
/// T1/dt and dT2/dt are integers so gate transitions sit on grid points.
struct ScheduleGrid {
    std::int64_t steps_active = 0;
    std::int64_t steps_period = 0;

    ScheduleGrid() = default;
    ScheduleGrid(const ResetSchedule& sched, double dt) {
        steps_period = detail::grid_steps(sched.period(), dt, "T1");
        const std::int64_t reset = detail::grid_steps(sched.dT2, dt, "dT2");
        steps_active = steps_period - reset;
        if (steps_active <= 0) throw ValidationError("schedule.T", "active window shorter than one step");
    }

    bool in_reset_window(std::int64_t step) const noexcept { return step % steps_period >= steps_active; }
};

/// One explicit Euler step of x' = f(t, x).
template <class Rhs>
std::vector<double> euler_step(Rhs&& f, double t, std::span<const double> x, double dt) {
    std::vector<double> k = f(t, x);
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += dt * k[i];
    return out;
}

/// One classical RK4 step of x' = f(t, x).
template <class Rhs>
std::vector<double> rk4_step(Rhs&& f, double t, std::span<const double> x, double dt) {
    const std::size_t n = x.size();
    std::vector<double> tmp(n);
    const auto k1 = f(t, x);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    const auto k2 = f(t + 0.5 * dt, std::span<const double>(tmp));
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    const auto k3 = f(t + 0.5 * dt, std::span<const double>(tmp));
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    const auto k4 = f(t + dt, std::span<const double>(tmp));
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t i = 0; i < n; ++i) out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

template <class Rhs>
std::vector<double> method_step(Method m, Rhs&& f, double t, std::span<const double> x, double dt) {
    return m == Method::rk4 ? rk4_step(f, t, x, dt) : euler_step(f, t, x, dt);
}

struct Trajectory {
    std::vector<double> t;
    std::vector<std::vector<double>> x;
};

/// Integrates x' = f(t, x) on the fixed grid t_k = k dt up to t_end,
/// keeping every `stride`-th sample (the final sample is always kept).
template <class Rhs>
Trajectory integrate_fixed(Rhs&& f, std::vector<double> x, double t_end, const IntegratorConfig& icfg,
                           std::int64_t stride = 1) {
    icfg.validate();
    if (!(t_end > 0.0)) throw ValidationError("t_end", "must be positive");
    const auto steps = static_cast<std::int64_t>(std::llround(t_end / icfg.dt));
    Trajectory tr;
    tr.t.push_back(0.0);
    tr.x.push_back(x);
    for (std::int64_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * icfg.dt;
        x = method_step(icfg.method, f, t, x, icfg.dt);
        const double t_next = static_cast<double>(k + 1) * icfg.dt;
        detail::check_finite(x, t_next, "state");
        if ((k + 1) % stride == 0 || k + 1 == steps) {
            tr.t.push_back(t_next);
            tr.x.push_back(x);
        }
    }
    return tr;
}

/// Free-running ensemble x_i' = alpha_i x_i (1 - beta_i x_i); no schedule, no adaptation.
inline Trajectory integrate_autonomous(const LogisticEnsemble& sys, double t_end, const IntegratorConfig& icfg,
                                       std::int64_t stride = 1) {
    sys.validate();
    auto f = [&sys](double, std::span<const double> x) {
        std::vector<double> dx(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = sys.alpha[i] * x[i] * (1.0 - sys.beta[i] * x[i]);
        return dx;
    };
    return integrate_fixed(f, sys.x0, t_end, icfg, stride);
}

/// Gate and dead-zone values that governed one step, with the error at step start.
struct StepInfo {
    int lam = 0;
    int S = 0;
    double e = 0.0;
};

namespace detail {

inline double move_toward(double v, double target, double h) noexcept {
    const double d = v - target;
    if (std::abs(d) <= h) return target;
    return d > 0.0 ? v - h : v + h;
}

}  // namespace detail

/// Combined reference/tracking/adaptation system bound to its configuration.
///
/// Every step is synchronous: all blocks are advanced from the same
/// pre-step state. lambda is evaluated once at step start. During reset
/// steps each component moves l0*dt toward x0 and snaps onto it when
/// closer than that, which is what an Euler step of -l0 sigma(x - x0)
/// plus the snap rule produces. RK4 freezes lambda and S_delta at their
/// step-start values across its stages.
class CombinedSystem {
public:
    CombinedSystem(Plant plant, ResetSchedule sched, AdaptationConfig acfg, IntegratorConfig icfg)
        : plant_(std::move(plant)), sched_(sched), acfg_(std::move(acfg)), icfg_(icfg) {
        plant_.validate();
        sched_.validate();
        icfg_.validate();
        acfg_.validate(plant_.size());
        grid_ = ScheduleGrid(sched_, icfg_.dt);
    }

    const Plant& plant() const noexcept { return plant_; }
    const ResetSchedule& schedule() const noexcept { return sched_; }
    const AdaptationConfig& adaptation() const noexcept { return acfg_; }
    const IntegratorConfig& integrator() const noexcept { return icfg_; }
    const ScheduleGrid& grid() const noexcept { return grid_; }

    /// Initial state: both systems at x0, estimates and gain as given.
    AdaptiveState initial_state(std::vector<double> alpha_hat, std::vector<double> q_hat,
                                std::vector<double> K) const {
        const std::size_t n = plant_.size();
        detail::require_same_length(n, alpha_hat.size(), "alpha_hat");
        detail::require_same_length(n, q_hat.size(), "q_hat");
        detail::require_same_length(n, K.size(), "K");
        AdaptiveState s;
        s.x = plant_.x0;
        s.x_hat = plant_.x0;
        s.alpha_hat = std::move(alpha_hat);
        s.q_hat = std::move(q_hat);
        s.K = std::move(K);
        return s;
    }

    double error(const AdaptiveState& s) const noexcept {
        double e = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) e += plant_.c[i] * (s.x_hat[i] - s.x[i]);
        return e;
    }

    int gate(const AdaptiveState& s) const noexcept {
        if (s.latched) return 1;
        if (grid_.in_reset_window(s.step)) return 1;
        return std::isfinite(sched_.D) && euclidean_norm(s.x_hat) >= sched_.D ? 1 : 0;
    }

    /// Advances `s` by one dt in place and reports the gate values used.
    StepInfo advance(AdaptiveState& s) const {
        if (s.step % grid_.steps_period == 0) s.latched = false;
        StepInfo info;
        info.lam = gate(s);
        if (sched_.latched && info.lam == 1 && !grid_.in_reset_window(s.step)) s.latched = true;
        info.e = error(s);
        const std::size_t n = s.size();
        const double dt = icfg_.dt;

        if (info.lam == 1) {
            const double h = sched_.l0 * dt;
            for (std::size_t i = 0; i < n; ++i) {
                s.x[i] = detail::move_toward(s.x[i], plant_.x0[i], h);
                s.x_hat[i] = detail::move_toward(s.x_hat[i], plant_.x0[i], h);
            }
        } else {
            info.S = dead_zone(info.e, acfg_.delta);
            if (icfg_.method == Method::euler) {
                euler_active(s, info);
            } else {
                rk4_active(s, info);
            }
        }
        ++s.step;
        s.t = static_cast<double>(s.step) * dt;
        detail::check_finite(s.x_hat, s.t, "tracking state");
        detail::check_finite(s.alpha_hat, s.t, "alpha_hat");
        detail::check_finite(s.q_hat, s.t, "q_hat");
        detail::check_finite(s.K, s.t, "K");
        return info;
    }

private:
    void euler_active(AdaptiveState& s, const StepInfo& info) const {
        const std::size_t n = s.size();
        const double dt = icfg_.dt;
        const double e = info.e;
        const double ge = info.S ? acfg_.gamma * e : 0.0;
        const bool tied = acfg_.param == Parameterization::tied;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = s.x[i];
            const double xh = s.x_hat[i];
            const double dx = plant_.alpha[i] * x + plant_.q[i] * x * x;
            const double dxh = s.alpha_hat[i] * xh + s.q_hat[i] * xh * xh + s.K[i] * e;
            s.x[i] = x + dt * dx;
            s.x_hat[i] = xh + dt * dxh;
            if (info.S) {
                const double ci = plant_.c[i];
                if (tied) {
                    const double b = acfg_.known_beta[i];
                    const double da = -ge * ci * (xh - b * xh * xh);
                    s.alpha_hat[i] += dt * da;
                    s.q_hat[i] -= dt * b * da;
                } else {
                    s.alpha_hat[i] -= dt * ge * ci * xh;
                    s.q_hat[i] -= dt * ge * ci * xh * xh;
                }
                if (acfg_.adapt_gain) s.K[i] -= dt * ge * e * ci;
            }
        }
    }

    void rk4_active(AdaptiveState& s, const StepInfo& info) const {
        const std::size_t n = s.size();
        // Augmented state [x, x_hat, alpha_hat, q_hat, K].
        std::vector<double> z(5 * n);
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = s.x[i];
            z[n + i] = s.x_hat[i];
            z[2 * n + i] = s.alpha_hat[i];
            z[3 * n + i] = s.q_hat[i];
            z[4 * n + i] = s.K[i];
        }
        AdaptationConfig frozen = acfg_;
        if (!info.S) frozen.delta = std::numeric_limits<double>::infinity();
        else frozen.delta = -1.0;  // S = 1 throughout the step
        auto f = [&](double, std::span<const double> zz) {
            std::vector<double> dz(5 * n);
            AdaptiveState st;
            st.x.assign(zz.begin(), zz.begin() + n);
            st.x_hat.assign(zz.begin() + n, zz.begin() + 2 * n);
            st.alpha_hat.assign(zz.begin() + 2 * n, zz.begin() + 3 * n);
            st.q_hat.assign(zz.begin() + 3 * n, zz.begin() + 4 * n);
            st.K.assign(zz.begin() + 4 * n, zz.end());
            const double e = error(st);
            const auto dx = reference_rhs(st.x, plant_, sched_, 0);
            const auto dxh = tracking_rhs(st.x_hat, e, st, plant_.x0, sched_, 0);
            const auto r = adaptation_rhs(st, e, frozen, plant_.c, 0);
            for (std::size_t i = 0; i < n; ++i) {
                dz[i] = dx[i];
                dz[n + i] = dxh[i];
                dz[2 * n + i] = r.dalpha[i];
                dz[3 * n + i] = r.dq[i];
                dz[4 * n + i] = r.dK[i];
            }
            return dz;
        };
        z = rk4_step(f, s.t, z, icfg_.dt);
        for (std::size_t i = 0; i < n; ++i) {
            s.x[i] = z[i];
            s.x_hat[i] = z[n + i];
            s.alpha_hat[i] = z[2 * n + i];
            s.q_hat[i] = z[3 * n + i];
            s.K[i] = z[4 * n + i];
        }
    }

    Plant plant_;
    ResetSchedule sched_;
    AdaptationConfig acfg_;
    IntegratorConfig icfg_;
    ScheduleGrid grid_;
};

/// Value-semantics wrapper around CombinedSystem::advance.
inline AdaptiveState step(AdaptiveState state, const Plant& plant, const ResetSchedule& sched,
                          const AdaptationConfig& acfg, const IntegratorConfig& icfg) {
    const CombinedSystem sys(plant, sched, acfg, icfg);
    sys.advance(state);
    return state;
}

}  // namespace logfit
