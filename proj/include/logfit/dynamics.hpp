#pragma once

// Vector fields of the combined reference/tracking system with periodic
// reset, the speed-gradient adaptation laws, and the forward-only
// multi-input and feedback ensembles.
//
// Canonical form of every logistic equation here is
//     x_i' = alpha_i x_i + q_i x_i^2,
// with q_i the signed quadratic coefficient (q = -alpha*beta for the
// x(1 - beta x) form, q = -beta for the alpha x - beta x^2 form). The
// regressors are xi_1,i(x) = x_i e_i and xi_2,i(x) = x_i^2 e_i; they are
// implicit in the loops below.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "logfit/core_model.hpp"
#include "logfit/errors.hpp"

namespace logfit {

/// lambda(t, D) window machinery: active for T, reset for dT2, norm cap D.
/// D = +inf disables the norm trigger (purely periodic gate).
struct ResetSchedule {
    double T = 2.0;
    double dT2 = 1.0;
    double D = 10.0;
    double l0 = 10.0;
    bool latched = false;  ///< keep lambda = 1 after a norm trigger until the period ends

    double period() const noexcept { return T + dT2; }

    void validate() const {
        if (!(T > 0.0 && std::isfinite(T))) throw ValidationError("schedule.T", "must be positive");
        if (!(dT2 > 0.0 && std::isfinite(dT2))) throw ValidationError("schedule.dT2", "must be positive");
        if (!(D > 0.0)) throw ValidationError("schedule.D", "must be positive");
        if (!(l0 > 0.0 && std::isfinite(l0))) throw ValidationError("schedule.l0", "must be positive");
        if (std::isfinite(D) && l0 < D / dT2) {
            throw ValidationError("schedule.l0",
                                  "reset reachability requires l0 >= D/dT2 (" + std::to_string(D / dT2) + ")");
        }
    }
};

/// Gate value at time t. Epoch boundaries are resolved with a relative
/// tolerance so that t = j*T1 computed in floating point lands correctly.
inline int lambda_gate(double t, double x_hat_norm, const ResetSchedule& sched) noexcept {
    if (std::isfinite(sched.D) && x_hat_norm >= sched.D) {
        return 1;
    }
    const double period = sched.period();
    const double eps = 1e-9 * period;
    const double j = std::floor((t + eps) / period);
    const double phase = std::max(0.0, t - j * period);
    return phase >= sched.T - eps ? 1 : 0;
}

inline double sign_of(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline std::vector<double> signum_vec(std::span<const double> v) {
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), sign_of);
    return out;
}

inline double output(std::span<const double> weights, std::span<const double> x) noexcept {
    return std::inner_product(weights.begin(), weights.end(), x.begin(), 0.0);
}

/// Scaled so that large finite components do not overflow to inf.
inline double euclidean_norm(std::span<const double> v) noexcept {
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    double s = 0.0;
    for (double x : v) s += (x / scale) * (x / scale);
    return scale * std::sqrt(s);
}

/// Ground-truth reference system in the canonical chart.
struct Plant {
    std::vector<double> alpha;
    std::vector<double> q;
    std::vector<double> c;
    std::vector<double> x0;

    std::size_t size() const noexcept { return alpha.size(); }

    static Plant from(const LogisticEnsemble& sys) {
        sys.validate();
        return Plant{sys.alpha, sys.quadratic(), sys.c_out, sys.x0};
    }

    void validate() const {
        if (alpha.empty()) throw ValidationError("plant.alpha", "empty");
        detail::require_same_length(alpha.size(), q.size(), "plant.q");
        detail::require_same_length(alpha.size(), c.size(), "plant.c");
        detail::require_same_length(alpha.size(), x0.size(), "plant.x0");
        detail::require_finite(alpha, "plant.alpha");
        detail::require_finite(q, "plant.q");
        detail::require_finite(c, "plant.c");
        detail::require_finite(x0, "plant.x0");
    }
};

enum class Parameterization {
    independent,  ///< alpha_hat and q_hat adapted separately (Example 1)
    tied,         ///< saturation known: q_hat = -beta*alpha_hat, regressor x(1 - beta x) (Example 2)
};

struct AdaptationConfig {
    double gamma = 0.001;
    double delta = 1e-4;   ///< dead-zone half width
    double delta1 = 1e-3;  ///< slack in the |e| < delta + delta1 bound; not used by the dynamics
    bool adapt_gain = true;  ///< integrate K' = -gamma S e^2 c; otherwise K stays at its initial value
    Parameterization param = Parameterization::tied;
    std::vector<double> known_beta;  ///< saturation per term, used by the tied parameterization

    void validate(std::size_t n) const {
        if (!(gamma > 0.0 && std::isfinite(gamma))) throw ValidationError("adaptation.gamma", "must be positive");
        // +inf is allowed and freezes adaptation
        if (!(delta >= 0.0)) throw ValidationError("adaptation.delta", "must be >= 0");
        if (!(delta1 > 0.0 && std::isfinite(delta1))) throw ValidationError("adaptation.delta1", "must be positive");
        if (param == Parameterization::tied) {
            detail::require_same_length(n, known_beta.size(), "adaptation.known_beta");
        }
    }
};

/// Full state of the combined system plus adapted quantities.
struct AdaptiveState {
    double t = 0.0;
    std::int64_t step = 0;
    std::vector<double> x;
    std::vector<double> x_hat;
    std::vector<double> alpha_hat;
    std::vector<double> q_hat;  ///< signed quadratic estimate; beta_hat = -q_hat in the alpha x - beta x^2 form
    std::vector<double> K;
    bool latched = false;

    std::size_t size() const noexcept { return x.size(); }
};

/// S_delta(e): 1 outside the dead zone, 0 inside.
inline int dead_zone(double e, double delta) noexcept { return std::abs(e) > delta ? 1 : 0; }

inline std::vector<double> reference_rhs(std::span<const double> x, const Plant& plant, const ResetSchedule& sched,
                                         int lam) {
    std::vector<double> dx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (lam != 0) {
            dx[i] = -sched.l0 * sign_of(x[i] - plant.x0[i]);
        } else {
            dx[i] = plant.alpha[i] * x[i] + plant.q[i] * x[i] * x[i];
        }
    }
    return dx;
}

/// Tracking copy of the plant with estimated parameters and output-error
/// injection K e. `e` is y(x_hat) - y(x), supplied by the caller.
inline std::vector<double> tracking_rhs(std::span<const double> x_hat, double e, const AdaptiveState& state,
                                        std::span<const double> x0, const ResetSchedule& sched, int lam) {
    std::vector<double> dx(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
        if (lam != 0) {
            dx[i] = -sched.l0 * sign_of(x_hat[i] - x0[i]);
        } else {
            dx[i] = state.alpha_hat[i] * x_hat[i] + state.q_hat[i] * x_hat[i] * x_hat[i] + state.K[i] * e;
        }
    }
    return dx;
}

struct AdaptationRates {
    std::vector<double> dalpha;
    std::vector<double> dq;
    std::vector<double> dK;
};

/// Speed-gradient laws with dead zone:
///   alpha_hat' = -gamma e S c_i xi_1,i(x_hat),  q_hat' = -gamma e S c_i xi_2,i(x_hat),
///   k_i' = -gamma S e^2 c_i,
/// all multiplied by (1 - lambda). `x_hat` defaults to state.x_hat.
inline AdaptationRates adaptation_rhs(const AdaptiveState& state, double e, const AdaptationConfig& cfg,
                                      std::span<const double> c_out, int lam,
                                      std::span<const double> x_hat = {}) {
    const std::size_t n = state.size();
    if (x_hat.empty()) x_hat = state.x_hat;
    AdaptationRates r{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    if (lam != 0 || dead_zone(e, cfg.delta) == 0) {
        return r;
    }
    const double ge = cfg.gamma * e;
    for (std::size_t i = 0; i < n; ++i) {
        const double xh = x_hat[i];
        if (cfg.param == Parameterization::tied) {
            const double b = cfg.known_beta[i];
            r.dalpha[i] = -ge * c_out[i] * (xh - b * xh * xh);
            r.dq[i] = -b * r.dalpha[i];
        } else {
            r.dalpha[i] = -ge * c_out[i] * xh;
            r.dq[i] = -ge * c_out[i] * xh * xh;
        }
        if (cfg.adapt_gain) {
            r.dK[i] = -ge * e * c_out[i];
        }
    }
    return r;
}

/// Bound D2 on |C^T sum_i (alpha_i (xi_1,i(x_hat) - xi_1,i(x)) + q_i (xi_2,i(x_hat) - xi_2,i(x)))|
/// when both states lie in the ball of radius D:
///   |x_hat_i - x_i| <= 2D  and  |x_hat_i^2 - x_i^2| = |x_hat_i - x_i| |x_hat_i + x_i| <= 4D^2,
/// so D2 = sum_i |c_i| (2D |alpha_i| + 4D^2 |q_i|).
inline double state_difference_bound(const Plant& plant, double D) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < plant.size(); ++i) {
        d2 += std::abs(plant.c[i]) * (2.0 * D * std::abs(plant.alpha[i]) + 4.0 * D * D * std::abs(plant.q[i]));
    }
    return d2;
}

/// Constant gain k* along c with c^T k* = -1.01 D2/(delta - delta1).
inline std::vector<double> kstar_from_bound(std::span<const double> c_hat, double d2, double delta, double delta1) {
    const double cc = std::inner_product(c_hat.begin(), c_hat.end(), c_hat.begin(), 0.0);
    if (cc == 0.0) {
        throw ValidationError("c_hat", "output weights must not all vanish");
    }
    if (!(delta > delta1 && delta1 > 0.0)) {
        throw ValidationError("delta", "k* needs delta > delta1 > 0");
    }
    const double target = -1.01 * d2 / (delta - delta1);
    std::vector<double> k(c_hat.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        k[i] = target * c_hat[i] / cc;
    }
    return k;
}

inline std::vector<double> kstar_bound(const Plant& plant, double D, double delta, double delta1) {
    return kstar_from_bound(plant.c, state_difference_bound(plant, D), delta, delta1);
}

/// Weighted squared distance ||a - b||^2 / gamma.
inline double gamma_norm2(std::span<const double> a, std::span<const double> b, double gamma) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / gamma;
}

/// Lyapunov candidate
///   V = int_0^e S(v) v dv + 0.5 ||alpha_hat - alpha||^2_{1/gamma}
///       + 0.5 ||q_hat - q||^2_{1/gamma} + 0.5 ||K - k*||^2_{1/gamma}.
inline double lyapunov_value(const AdaptiveState& s, double e, const Plant& truth, std::span<const double> kstar,
                             const AdaptationConfig& cfg) {
    const double err_part = std::abs(e) > cfg.delta ? 0.5 * (e * e - cfg.delta * cfg.delta) : 0.0;
    return err_part + 0.5 * gamma_norm2(s.alpha_hat, truth.alpha, cfg.gamma) +
           0.5 * gamma_norm2(s.q_hat, truth.q, cfg.gamma) + 0.5 * gamma_norm2(s.K, kstar, cfg.gamma);
}

struct ParameterSnapshot {
    double t = 0.0;
    std::vector<double> alpha_hat;
    std::vector<double> q_hat;
    std::vector<double> K;
};

/// What the parameter-progress diagnostic needs: the true parameters, the
/// estimates at both ends of [t0, t], and samples of
/// S(e) (1 - lambda) |e sum_j k*_j c_j| on a time grid.
struct ProgressHistory {
    std::vector<double> alpha_true;
    std::vector<double> q_true;
    ParameterSnapshot start;
    ParameterSnapshot end;
    std::vector<double> times;
    std::vector<double> integrand;
};

struct ProgressBound {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds() const noexcept { return lhs >= rhs; }
};

inline double progress_integrand(double e, int lam, std::span<const double> kstar, std::span<const double> c_hat,
                                 const AdaptationConfig& cfg) {
    if (lam != 0 || dead_zone(e, cfg.delta) == 0) return 0.0;
    return std::abs(e * output(kstar, c_hat));
}

/// lhs = ||alpha_hat(t0)-alpha||^2 + ||q_hat(t0)-q||^2 - ||alpha_hat(t)-alpha||^2 - ||q_hat(t)-q||^2
/// rhs = ||K(t)-k*||^2 - ||K(t0)-k*||^2 + 2 delta1 int_{t0}^{t} integrand   (trapezoid)
/// with every norm weighted by 1/gamma.
inline ProgressBound progress_bound(const ProgressHistory& h, std::span<const double> kstar,
                                    const AdaptationConfig& cfg) {
    if (h.alpha_true.empty() || h.q_true.size() != h.alpha_true.size()) {
        throw ValidationError("alpha_true", "progress bound needs the true parameters");
    }
    if (h.times.size() != h.integrand.size()) {
        throw ValidationError("integrand", "sample count does not match time grid");
    }
    const double g = cfg.gamma;
    ProgressBound b;
    b.lhs = gamma_norm2(h.start.alpha_hat, h.alpha_true, g) + gamma_norm2(h.start.q_hat, h.q_true, g) -
            gamma_norm2(h.end.alpha_hat, h.alpha_true, g) - gamma_norm2(h.end.q_hat, h.q_true, g);
    double integral = 0.0;
    for (std::size_t k = 1; k < h.times.size(); ++k) {
        integral += 0.5 * (h.integrand[k] + h.integrand[k - 1]) * (h.times[k] - h.times[k - 1]);
    }
    b.rhs = gamma_norm2(h.end.K, kstar, g) - gamma_norm2(h.start.K, kstar, g) + 2.0 * cfg.delta1 * integral;
    return b;
}

/// Input-driven ensemble  x_i' = sum_j alpha_ij xi_j'(t) x_i (1 - beta_ij x_i).
/// The saturation coefficient carries the input index, so each input
/// channel contributes its own logistic factor.
struct MultiInputSystem {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<double> alpha;  ///< n x m, row-major
    std::vector<double> beta;   ///< n x m, row-major
    std::vector<double> c_out;
    std::vector<double> x0;
    std::vector<std::function<double(double)>> input_rates;

    double a(std::size_t i, std::size_t j) const noexcept { return alpha[i * m + j]; }
    double b(std::size_t i, std::size_t j) const noexcept { return beta[i * m + j]; }

    void validate() const {
        if (n == 0 || m == 0) throw ValidationError("multi_input.n", "n and m must be positive");
        detail::require_same_length(n * m, alpha.size(), "multi_input.alpha");
        detail::require_same_length(n * m, beta.size(), "multi_input.beta");
        detail::require_same_length(n, c_out.size(), "multi_input.c_out");
        detail::require_same_length(n, x0.size(), "multi_input.x0");
        detail::require_same_length(m, input_rates.size(), "multi_input.input_rates");
        detail::require_finite(x0, "multi_input.x0");
    }
};

inline std::vector<double> multiinput_rhs(const MultiInputSystem& sys, std::span<const double> x, double t) {
    std::vector<double> rates(sys.m);
    for (std::size_t j = 0; j < sys.m; ++j) rates[j] = sys.input_rates[j](t);
    std::vector<double> dx(sys.n, 0.0);
    for (std::size_t i = 0; i < sys.n; ++i) {
        for (std::size_t j = 0; j < sys.m; ++j) {
            dx[i] += sys.a(i, j) * rates[j] * x[i] * (1.0 - sys.b(i, j) * x[i]);
        }
    }
    return dx;
}

struct FeedbackRates {
    std::vector<double> dx;
    double dz = 0.0;
};

/// Ensemble driven by its own output:  x_i' = alpha_i y x_i (1 - beta_i x_i),  z' = y,  y = C^T x.
inline FeedbackRates feedback_rhs(const LogisticEnsemble& sys, std::span<const double> x) {
    const double y = output(sys.c_out, x);
    FeedbackRates r{std::vector<double>(x.size()), y};
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.dx[i] = sys.alpha[i] * y * x[i] * (1.0 - sys.beta[i] * x[i]);
    }
    return r;
}

}  // namespace logfit
