#pragma once

// Static sigmoid superpositions, logistic ODE ensembles, and the exact
// conversions between the two representations.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "logfit/errors.hpp"

namespace logfit {

/// Logistic sigmoid 1/(1+e^{-x}); branches keep exp() from overflowing.
inline double sigmoid(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double ex = std::exp(x);
    return ex / (1.0 + ex);
}

/// Derivative of the sigmoid, f(x)(1 - f(x)).
inline double sigmoid_slope(double x) noexcept {
    const double s = sigmoid(x);
    return s * (1.0 - s);
}

/// Inverse sigmoid. Requires p in the open interval (0, 1).
inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ValidationError("p", "logit argument must lie in (0,1), got " + std::to_string(p));
    }
    return std::log(p) - std::log1p(-p);
}

namespace detail {

inline void require_same_length(std::size_t n, std::size_t m, const char* field) {
    if (n != m) {
        throw ValidationError(field, "length " + std::to_string(m) + " does not match n=" + std::to_string(n));
    }
}

inline void require_finite(std::span<const double> v, const char* field) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw ValidationError(std::string(field) + "[" + std::to_string(i) + "]", "must be finite");
        }
    }
}

}  // namespace detail

/// y(t) = sum_i c_i f(a_i t + b_i).
struct SigmoidSum {
    std::vector<double> a;  ///< slopes, 1/time
    std::vector<double> b;  ///< offsets
    std::vector<double> c;  ///< output weights

    std::size_t size() const noexcept { return a.size(); }

    void validate() const {
        if (a.empty()) {
            throw ValidationError("a", "a sigmoid sum needs at least one term");
        }
        detail::require_same_length(a.size(), b.size(), "b");
        detail::require_same_length(a.size(), c.size(), "c");
        detail::require_finite(a, "a");
        detail::require_finite(b, "b");
        detail::require_finite(c, "c");
    }
};

/// n decoupled logistic equations  x_i' = alpha_i x_i (1 - beta_i x_i),
/// observed through y = sum_i c_out_i x_i.
///
/// The normalized chart has beta = 1 and x0 in (0,1); every solution there
/// is a single sigmoid. Dynamics code works with the signed quadratic
/// coefficient q_i = -alpha_i beta_i so that x' = alpha x + q x^2.
struct LogisticEnsemble {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> c_out;
    std::vector<double> x0;

    std::size_t size() const noexcept { return alpha.size(); }

    double quadratic(std::size_t i) const noexcept { return -alpha[i] * beta[i]; }

    std::vector<double> quadratic() const {
        std::vector<double> q(size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            q[i] = quadratic(i);
        }
        return q;
    }

    void validate() const {
        if (alpha.empty()) {
            throw ValidationError("alpha", "an ensemble needs at least one equation");
        }
        detail::require_same_length(alpha.size(), beta.size(), "beta");
        detail::require_same_length(alpha.size(), c_out.size(), "c_out");
        detail::require_same_length(alpha.size(), x0.size(), "x0");
        detail::require_finite(alpha, "alpha");
        detail::require_finite(beta, "beta");
        detail::require_finite(c_out, "c_out");
        detail::require_finite(x0, "x0");
    }

    bool normalized() const noexcept {
        for (std::size_t i = 0; i < size(); ++i) {
            if (beta[i] != 1.0 || !(x0[i] > 0.0 && x0[i] < 1.0)) {
                return false;
            }
        }
        return true;
    }
};

inline double eval_sigmoid_sum(const SigmoidSum& model, double t) noexcept {
    double y = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        y += model.c[i] * sigmoid(model.a[i] * t + model.b[i]);
    }
    return y;
}

/// Closed-form solution of the ensemble as a sigmoid sum:
/// a = alpha, b = logit(beta x0), c = c_out / beta.
inline SigmoidSum logistic_to_sigmoid(const LogisticEnsemble& sys) {
    sys.validate();
    SigmoidSum out;
    out.a = sys.alpha;
    out.b.resize(sys.size());
    out.c.resize(sys.size());
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const std::string idx = "[" + std::to_string(i) + "]";
        if (sys.beta[i] == 0.0) {
            throw ValidationError("beta" + idx, "zero saturation coefficient has no sigmoid solution");
        }
        const double scaled = sys.beta[i] * sys.x0[i];
        if (!(scaled > 0.0 && scaled < 1.0)) {
            throw ValidationError("x0" + idx, "beta*x0 must lie in (0,1), got " + std::to_string(scaled));
        }
        out.b[i] = logit(scaled);
        out.c[i] = sys.c_out[i] / sys.beta[i];
    }
    return out;
}

/// Inverse of logistic_to_sigmoid, landing in the normalized chart
/// (beta = 1, c_out = c, x0 = f(b)).
inline LogisticEnsemble sigmoid_to_logistic(const SigmoidSum& model) {
    model.validate();
    LogisticEnsemble out;
    out.alpha = model.a;
    out.beta.assign(model.size(), 1.0);
    out.c_out = model.c;
    out.x0.resize(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
        const std::string idx = "[" + std::to_string(i) + "]";
        if (model.c[i] == 0.0) {
            throw ValidationError("c" + idx, "zero output weight makes the conversion non-invertible");
        }
        const double x0 = sigmoid(model.b[i]);
        if (!(x0 > 0.0 && x0 < 1.0)) {
            throw ValidationError("b" + idx, "f(b) rounds to 0 or 1; initial condition leaves (0,1)");
        }
        out.x0[i] = x0;
    }
    return out;
}

enum class ScaleMode {
    beta_normalize,    ///< x' = beta x      -> beta = 1, c = c/beta, x0 = beta x0
    output_normalize,  ///< x' = c_out x     -> c = 1, beta = beta/c, x0 = c x0
};

/// Linear change of coordinates that leaves the output trajectory unchanged.
inline LogisticEnsemble scale_coordinates(const LogisticEnsemble& sys, ScaleMode mode) {
    sys.validate();
    LogisticEnsemble out = sys;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const std::string idx = "[" + std::to_string(i) + "]";
        if (mode == ScaleMode::beta_normalize) {
            const double s = sys.beta[i];
            if (s == 0.0) {
                throw ValidationError("beta" + idx, "cannot normalize a zero saturation coefficient");
            }
            out.beta[i] = 1.0;
            out.c_out[i] = sys.c_out[i] / s;
            out.x0[i] = sys.x0[i] * s;
        } else {
            const double s = sys.c_out[i];
            if (s == 0.0) {
                throw ValidationError("c_out" + idx, "cannot normalize a zero output weight");
            }
            out.c_out[i] = 1.0;
            out.beta[i] = sys.beta[i] / s;
            out.x0[i] = sys.x0[i] * s;
        }
    }
    return out;
}

/// Brings a general-beta ensemble into the normalized chart and checks
/// x0 in (0,1).
inline LogisticEnsemble normalize(const LogisticEnsemble& sys) {
    LogisticEnsemble out = scale_coordinates(sys, ScaleMode::beta_normalize);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(out.x0[i] > 0.0 && out.x0[i] < 1.0)) {
            throw ValidationError("x0[" + std::to_string(i) + "]", "beta*x0 must lie in (0,1)");
        }
    }
    return out;
}

}  // namespace logfit
