#pragma once

// Trial orchestration, the d/R metrics, and the two reference experiments:
// the single-sigmoid comparison against gradient descent and the
// ten-sigmoid randomized estimation study.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "logfit/baselines.hpp"
#include "logfit/core_model.hpp"
#include "logfit/dynamics.hpp"
#include "logfit/errors.hpp"
#include "logfit/integrator.hpp"
#include "logfit/rng.hpp"

namespace logfit {

/// Hypercube [lo, hi]^n for the initial estimates.
struct InitBox {
    double lo = 0.0;
    double hi = 12.0;
};

struct ExperimentConfig {
    LogisticEnsemble sys;  ///< ground truth
    ResetSchedule sched;
    AdaptationConfig acfg;
    IntegratorConfig icfg;
    std::int64_t epochs = 2000;
    std::int64_t trials = 20;
    std::uint64_t seed = 0;
    InitBox init_box;
    std::int64_t record_stride = 0;     ///< steps between trace rows; 0 disables traces
    std::vector<double> beta_hat0;      ///< initial saturation estimates (independent mode); empty -> truth
    std::vector<double> K0;             ///< initial gain; empty -> zeros
    std::int64_t tail_epochs = 10;      ///< window for the terminal |e| bound

    /// Everything except the epoch/trial counts.
    void validate_model() const {
        sys.validate();
        sched.validate();
        icfg.validate();
        AdaptationConfig a = acfg;
        if (a.param == Parameterization::tied && a.known_beta.empty()) a.known_beta = sys.beta;
        a.validate(sys.size());
        if (!(init_box.lo < init_box.hi) || !std::isfinite(init_box.lo) || !std::isfinite(init_box.hi)) {
            throw ValidationError("init_box", "bounds must be finite with lo < hi");
        }
        if (!beta_hat0.empty()) detail::require_same_length(sys.size(), beta_hat0.size(), "beta_hat0");
        if (!K0.empty()) detail::require_same_length(sys.size(), K0.size(), "K0");
        if (record_stride < 0) throw ValidationError("record_stride", "must be >= 0");
        if (tail_epochs < 1) throw ValidationError("tail_epochs", "must be >= 1");
        (void)ScheduleGrid(sched, icfg.dt);
    }

    void validate() const {
        validate_model();
        if (epochs < 1) throw ValidationError("epochs", "must be >= 1");
        if (trials < 1) throw ValidationError("trials", "must be >= 1");
    }

    /// Combined system for this config; the tied parameterization takes the
    /// true saturation coefficients as known.
    CombinedSystem make_system() const {
        AdaptationConfig a = acfg;
        if (a.param == Parameterization::tied && a.known_beta.empty()) a.known_beta = sys.beta;
        return CombinedSystem(Plant::from(sys), sched, std::move(a), icfg);
    }
};

struct TraceRow {
    double t = 0.0;
    double e = 0.0;
    int lambda = 0;
    double d = 0.0;
    double R = 0.0;
    std::vector<double> alpha_hat;
    std::vector<double> K;
};

enum class TrialStatus { ok, diverged };

inline const char* to_string(TrialStatus s) noexcept { return s == TrialStatus::ok ? "ok" : "diverged"; }

struct TrialRecord {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double d0 = 0.0;
    double d_final = 0.0;
    double R0 = 0.0;
    double R_final = 0.0;
    double tail_max_abs_e = 0.0;  ///< max |e| on lambda = 0 steps over the last tail_epochs epochs
    TrialStatus status = TrialStatus::ok;
    std::string message;
    std::vector<TraceRow> trace;
};

/// Euclidean parameter distance. Coordinatewise, so a permutation of an
/// output-equivalent model still reports a nonzero distance.
inline double metric_d(std::span<const double> alpha_hat, std::span<const double> alpha_true) {
    if (alpha_hat.size() != alpha_true.size()) throw ValidationError("alpha_hat", "length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < alpha_hat.size(); ++i) {
        const double d = alpha_hat[i] - alpha_true[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Epoch-mean squared error sum e^2 dt / T1 over exactly one period of samples.
inline double metric_R(std::span<const double> e_samples, double dt, double T1) {
    const double expected = T1 / dt;
    if (std::abs(static_cast<double>(e_samples.size()) - expected) > 1e-6 * expected) {
        throw ValidationError("e_samples", "window of " + std::to_string(e_samples.size()) +
                                               " samples does not span one period (" + std::to_string(expected) + ")");
    }
    double s = 0.0;
    for (double e : e_samples) s += e * e;
    return s * dt / T1;
}

namespace detail {

inline AdaptiveState initial_trial_state(const ExperimentConfig& cfg, const CombinedSystem& sys,
                                         std::uint64_t seed) {
    const std::size_t n = cfg.sys.size();
    Xoshiro256ss rng(seed);
    std::vector<double> alpha_hat(n);
    for (auto& a : alpha_hat) a = rng.uniform(cfg.init_box.lo, cfg.init_box.hi);
    const std::vector<double>& beta0 = cfg.beta_hat0.empty() ? cfg.sys.beta : cfg.beta_hat0;
    std::vector<double> q_hat(n);
    for (std::size_t i = 0; i < n; ++i) q_hat[i] = -alpha_hat[i] * beta0[i];
    std::vector<double> K = cfg.K0.empty() ? std::vector<double>(n, 0.0) : cfg.K0;
    return sys.initial_state(std::move(alpha_hat), std::move(q_hat), std::move(K));
}

/// R of one epoch at the given estimates with adaptation switched off.
inline double frozen_epoch_R(const ExperimentConfig& cfg, const AdaptiveState& start) {
    AdaptationConfig frozen = cfg.acfg;
    frozen.delta = std::numeric_limits<double>::infinity();
    if (frozen.param == Parameterization::tied && frozen.known_beta.empty()) frozen.known_beta = cfg.sys.beta;
    const CombinedSystem probe(Plant::from(cfg.sys), cfg.sched, frozen, cfg.icfg);
    AdaptiveState s = start;
    double sum = 0.0;
    for (std::int64_t k = 0; k < probe.grid().steps_period; ++k) {
        const StepInfo info = probe.advance(s);
        sum += info.e * info.e;
    }
    return sum * cfg.icfg.dt / cfg.sched.period();
}

}  // namespace detail

/// One trial: draw alpha_hat(0) from the init box with the trial's own
/// stream, run `epochs` periods, report d and R at start and end.
///
/// R0 is the epoch-mean squared error of the initial estimates (one period
/// with adaptation frozen); R_final is that of the last adaptive epoch.
inline TrialRecord run_trial(const ExperimentConfig& cfg, std::size_t trial_index) {
    cfg.validate_model();
    const CombinedSystem sys = cfg.make_system();
    TrialRecord rec;
    rec.trial = trial_index;
    rec.seed = trial_seed(cfg.seed, trial_index);
    AdaptiveState s = detail::initial_trial_state(cfg, sys, rec.seed);
    const auto& truth = cfg.sys.alpha;
    rec.d0 = metric_d(s.alpha_hat, truth);
    rec.R0 = std::numeric_limits<double>::quiet_NaN();

    const std::int64_t per = sys.grid().steps_period;
    const std::int64_t tail_from = std::max<std::int64_t>(0, cfg.epochs - cfg.tail_epochs);
    try {
        rec.R0 = detail::frozen_epoch_R(cfg, s);
        double last_R = rec.R0;
        for (std::int64_t ep = 0; ep < cfg.epochs; ++ep) {
            double sum = 0.0;
            for (std::int64_t k = 0; k < per; ++k) {
                if (cfg.record_stride > 0 && s.step % cfg.record_stride == 0) {
                    rec.trace.push_back({s.t, sys.error(s), sys.gate(s), metric_d(s.alpha_hat, truth), last_R,
                                         s.alpha_hat, s.K});
                }
                const StepInfo info = sys.advance(s);
                sum += info.e * info.e;
                if (ep >= tail_from && info.lam == 0) {
                    rec.tail_max_abs_e = std::max(rec.tail_max_abs_e, std::abs(info.e));
                }
            }
            last_R = sum * cfg.icfg.dt / cfg.sched.period();
        }
        rec.d_final = metric_d(s.alpha_hat, truth);
        rec.R_final = last_R;
    } catch (const DivergenceError& err) {
        rec.status = TrialStatus::diverged;
        rec.message = err.what();
        rec.d_final = std::numeric_limits<double>::quiet_NaN();
        rec.R_final = std::numeric_limits<double>::quiet_NaN();
    }
    return rec;
}

/// Runs every trial, spreading them over worker threads. Output order is
/// by trial index regardless of completion order.
inline std::vector<TrialRecord> run_trials(const ExperimentConfig& cfg, unsigned workers = 0) {
    cfg.validate();
    const auto count = static_cast<std::size_t>(cfg.trials);
    std::vector<TrialRecord> out(count);
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    std::size_t next = 0;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            std::size_t idx;
            {
                std::lock_guard lock(mu);
                if (next >= count) return;
                idx = next++;
            }
            out[idx] = run_trial(cfg, idx);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return out;
}

// ---------------------------------------------------------------------------
// Single-sigmoid comparison.

enum class Example1Variant { adaptive, pattern, batch };

struct Example1Settings {
    double alpha = 2.0 / 3.0;
    double beta = 1.0 / 3.0;  ///< quadratic coefficient of  x' = alpha x - beta x^2
    double x0 = 0.1;
    double l0 = 1.0;
    double period = 10.0;
    double pulse = 1.0;
    double gain = 0.2;   ///< constant K in  x_hat' = ... - K e
    double gamma = 0.2;
    double dt = 1e-3;
    double t_end = 900.0;
    std::int64_t stride = 1000;
};

struct Example1Sample {
    double t = 0.0;
    double a = 0.0;       ///< slope estimate
    double c = 0.0;       ///< amplitude in the comparison chart, alpha_hat / beta_hat for the adaptive run
    double beta_hat = 0.0;
    double J = 0.0;       ///< batch cost at (a, c)
};

struct Example1Result {
    Example1Variant variant = Example1Variant::adaptive;
    std::vector<Example1Sample> samples;
    double a_final = 0.0;
    double c_final = 0.0;
    double J_final = 0.0;
    int chart_singularities = 0;  ///< sign changes of beta_hat (c passes through infinity)
};

/// Plant, schedule and adaptation for the adaptive single-sigmoid run. The
/// gate is purely periodic (no norm trigger).
inline CombinedSystem example1_system(const Example1Settings& st = {}) {
    Plant plant{{st.alpha}, {-st.beta}, {1.0}, {st.x0}};
    ResetSchedule sched;
    sched.T = st.period - st.pulse;
    sched.dT2 = st.pulse;
    sched.D = std::numeric_limits<double>::infinity();
    sched.l0 = st.l0;
    AdaptationConfig acfg;
    acfg.gamma = st.gamma;
    acfg.delta = 0.0;
    acfg.delta1 = 1e-3;
    acfg.adapt_gain = false;
    acfg.param = Parameterization::independent;
    return CombinedSystem(std::move(plant), sched, std::move(acfg), IntegratorConfig{st.dt, Method::euler});
}

/// `init` is a point (a, c) of the comparison chart. For the adaptive run it
/// maps to alpha_hat(0) = a, beta_hat(0) = a / c.
inline Example1Result example1(Example1Variant variant, std::pair<double, double> init,
                               const Example1Settings& st = {}) {
    const ScalarSigmoidTarget target{st.alpha, st.alpha / st.beta, 2.944, st.period - st.pulse};
    Example1Result res;
    res.variant = variant;
    if (variant != Example1Variant::adaptive) {
        const Flow flow = variant == Example1Variant::pattern ? Flow::pattern : Flow::batch;
        for (const auto& b : run_baseline(flow, init, st.gamma, st.t_end, IntegratorConfig{st.dt}, st.stride, target)) {
            res.samples.push_back({b.t, b.a, b.c, std::numeric_limits<double>::quiet_NaN(), b.J});
        }
    } else {
        if (init.second == 0.0) throw ValidationError("init", "amplitude must be nonzero for the adaptive run");
        const CombinedSystem sys = example1_system(st);
        AdaptiveState s = sys.initial_state({init.first}, {-init.first / init.second}, {-st.gain});
        const auto steps = static_cast<std::int64_t>(std::llround(st.t_end / st.dt));
        auto sample = [&] {
            const double a = s.alpha_hat[0];
            const double b = -s.q_hat[0];
            const double c = a / b;
            res.samples.push_back({s.t, a, c, b, std::isfinite(c) ? batch_cost(a, c, target) : INFINITY});
        };
        sample();
        double prev_beta = -s.q_hat[0];
        for (std::int64_t k = 0; k < steps; ++k) {
            sys.advance(s);
            const double b = -s.q_hat[0];
            if ((b > 0.0) != (prev_beta > 0.0)) ++res.chart_singularities;
            prev_beta = b;
            if ((k + 1) % st.stride == 0 || k + 1 == steps) sample();
        }
    }
    const auto& last = res.samples.back();
    res.a_final = last.a;
    res.c_final = last.c;
    res.J_final = last.J;
    return res;
}

// ---------------------------------------------------------------------------
// Ten-sigmoid randomized study.

enum class Scale { desk, full };

/// Slopes of the ground-truth ten-term sum. Only x0 and c come with the
/// reference setup, so the slopes are fixed here, all inside the [0, 12]
/// sampling box.
inline std::vector<double> example2_true_alpha() { return {2.0, 4.0, 6.0, 3.0, 8.0, 5.0, 1.0, 7.0, 10.0, 9.0}; }

inline ExperimentConfig example2_config(Scale scale = Scale::desk, std::uint64_t seed = 0) {
    ExperimentConfig cfg;
    cfg.sys.alpha = example2_true_alpha();
    cfg.sys.beta.assign(10, 1.0);
    cfg.sys.c_out = {3.0, 5.0, -3.0, 0.5, -1.0, 2.0, -0.7, 5.5, -3.0, 2.0};
    cfg.sys.x0 = {0.1, 0.2, 0.3, 0.2, 0.5, 0.1, 0.7, 0.2, 0.6, 0.4};
    cfg.sched = ResetSchedule{2.0, 1.0, 10.0, 10.0, false};
    cfg.acfg.gamma = 0.001;
    cfg.acfg.delta = 1e-4;
    cfg.acfg.delta1 = 1e-3;
    cfg.acfg.adapt_gain = true;
    cfg.acfg.param = Parameterization::tied;
    cfg.acfg.known_beta = cfg.sys.beta;
    cfg.icfg = IntegratorConfig{1e-4, Method::euler};
    cfg.epochs = scale == Scale::desk ? 2000 : 10000;
    cfg.trials = scale == Scale::desk ? 20 : 400;
    cfg.seed = seed;
    cfg.init_box = InitBox{0.0, 12.0};
    return cfg;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct Example2Summary {
    std::vector<TrialRecord> records;
    double median_d0 = 0.0;
    double median_d_final = 0.0;
    double frac_d_decreased = 0.0;
    double frac_R_decreased = 0.0;
    double frac_tail_flagged = 0.0;  ///< share of trials with tail |e| >= delta + delta1
};

inline Example2Summary summarize(std::vector<TrialRecord> records, const AdaptationConfig& acfg) {
    Example2Summary s;
    std::vector<double> d0, d1;
    std::size_t d_dec = 0, r_dec = 0, flagged = 0;
    for (const auto& r : records) {
        d0.push_back(r.d0);
        d1.push_back(r.d_final);
        if (r.status == TrialStatus::ok && r.d_final < r.d0) ++d_dec;
        if (r.status == TrialStatus::ok && r.R_final < r.R0) ++r_dec;
        if (r.status != TrialStatus::ok || !(r.tail_max_abs_e < acfg.delta + acfg.delta1)) ++flagged;
    }
    const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
    s.median_d0 = median(d0);
    s.median_d_final = median(d1);
    s.frac_d_decreased = static_cast<double>(d_dec) / n;
    s.frac_R_decreased = static_cast<double>(r_dec) / n;
    s.frac_tail_flagged = static_cast<double>(flagged) / n;
    s.records = std::move(records);
    return s;
}

inline Example2Summary example2(const ExperimentConfig& cfg, unsigned workers = 0) {
    return summarize(run_trials(cfg, workers), cfg.acfg);
}

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t start = 0;
    std::size_t end = 0;
};

/// Shared-edge histogram of start and end values over [0, max].
inline std::vector<HistogramBin> histogram(std::span<const double> start, std::span<const double> end,
                                           std::size_t bins = 20) {
    double top = 0.0;
    for (double v : start) if (std::isfinite(v)) top = std::max(top, v);
    for (double v : end) if (std::isfinite(v)) top = std::max(top, v);
    if (top <= 0.0) top = 1.0;
    std::vector<HistogramBin> h(bins);
    const double w = top / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        h[b].lo = w * static_cast<double>(b);
        h[b].hi = w * static_cast<double>(b + 1);
    }
    auto bin_of = [&](double v) {
        return std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, v) / w));
    };
    for (double v : start) if (std::isfinite(v)) ++h[bin_of(v)].start;
    for (double v : end) if (std::isfinite(v)) ++h[bin_of(v)].end;
    return h;
}

}  // namespace logfit
