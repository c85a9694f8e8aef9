#pragma once

// Self-contained invariant checks run by `logfit check`. Each check is a
// short randomized or instrumented run that reports pass/fail with a
// one-line detail.

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "logfit/baselines.hpp"
#include "logfit/core_model.hpp"
#include "logfit/dynamics.hpp"
#include "logfit/harness.hpp"
#include "logfit/integrator.hpp"
#include "logfit/rng.hpp"

namespace logfit {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace checks {

inline CheckResult conversion_fidelity(std::uint64_t seed) {
    Xoshiro256ss rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto n = static_cast<std::size_t>(1 + rng() % 8);
        LogisticEnsemble sys;
        for (std::size_t i = 0; i < n; ++i) {
            sys.alpha.push_back(rng.uniform(-5.0, 5.0));
            sys.beta.push_back(1.0);
            sys.c_out.push_back(rng.uniform(-3.0, 3.0));
            sys.x0.push_back(rng.uniform(0.01, 0.99));
        }
        const SigmoidSum model = logistic_to_sigmoid(sys);
        const auto tr = integrate_autonomous(sys, 10.0, IntegratorConfig{1e-3, Method::rk4}, 100);
        for (std::size_t k = 0; k < tr.t.size(); ++k) {
            worst = std::max(worst, std::abs(output(sys.c_out, tr.x[k]) - eval_sigmoid_sum(model, tr.t[k])));
        }
    }
    std::ostringstream os;
    os << "max |ODE - sigmoid sum| = " << worst;
    return {"conversion fidelity", worst < 1e-6, os.str()};
}

inline CheckResult round_trip(std::uint64_t seed) {
    Xoshiro256ss rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        SigmoidSum m;
        for (int i = 0; i < 4; ++i) {
            m.a.push_back(rng.uniform(-5.0, 5.0));
            m.b.push_back(rng.uniform(-5.0, 5.0));
            double c = rng.uniform(-3.0, 3.0);
            m.c.push_back(c == 0.0 ? 1.0 : c);
        }
        const SigmoidSum back = logistic_to_sigmoid(sigmoid_to_logistic(m));
        for (std::size_t i = 0; i < m.size(); ++i) {
            worst = std::max({worst, std::abs(back.a[i] - m.a[i]), std::abs(back.b[i] - m.b[i]),
                              std::abs(back.c[i] - m.c[i])});
        }
    }
    std::ostringstream os;
    os << "max parameter drift = " << worst;
    return {"sigmoid/logistic round trip", worst < 1e-12, os.str()};
}

inline CheckResult matched_descent(std::uint64_t seed) {
    Xoshiro256ss rng(seed);
    int violations = 0;
    for (int trial = 0; trial < 5; ++trial) {
        Plant p;
        for (int i = 0; i < 3; ++i) {
            const double a = rng.uniform(-2.0, 2.0);
            p.alpha.push_back(a);
            p.q.push_back(-a);
            p.c.push_back(rng.uniform(0.5, 2.0));
            p.x0.push_back(rng.uniform(0.1, 0.9));
        }
        ResetSchedule sched{100.0, 1.0, 3.0, 3.0, false};
        AdaptationConfig acfg;
        acfg.delta = 0.1;
        acfg.delta1 = 0.01;
        acfg.adapt_gain = false;
        acfg.param = Parameterization::independent;
        const auto kstar = kstar_bound(p, sched.D, acfg.delta, acfg.delta1);
        const CombinedSystem sys(p, sched, acfg, IntegratorConfig{1e-4});
        AdaptiveState s = sys.initial_state(p.alpha, p.q, kstar);
        for (auto& v : s.x_hat) v = std::clamp(v + rng.uniform(-0.3, 0.3), 0.01, 0.99);
        double prev = std::abs(sys.error(s));
        while (prev > acfg.delta && s.t < 10.0) {
            sys.advance(s);
            const double now = std::abs(sys.error(s));
            if (!(now < prev)) ++violations;
            prev = now;
        }
    }
    return {"matched-system descent", violations == 0, std::to_string(violations) + " non-decreasing steps"};
}

inline CheckResult dead_zone_and_reset() {
    ExperimentConfig cfg = example2_config(Scale::desk, 1);
    cfg.acfg.delta = 0.05;
    const CombinedSystem sys = cfg.make_system();
    AdaptiveState s = detail::initial_trial_state(cfg, sys, 7);
    int freeze = 0, reset = 0, gate = 0;
    for (std::int64_t ep = 0; ep < 20; ++ep) {
        for (std::int64_t k = 0; k < sys.grid().steps_period; ++k) {
            const AdaptiveState before = s;
            const StepInfo info = sys.advance(s);
            if ((info.lam == 1 || info.S == 0) &&
                (before.alpha_hat != s.alpha_hat || before.q_hat != s.q_hat || before.K != s.K)) {
                ++(info.lam == 1 ? gate : freeze);
            }
        }
        if (s.x != cfg.sys.x0 || s.x_hat != cfg.sys.x0) ++reset;
    }
    std::ostringstream os;
    os << freeze << " dead-zone, " << gate << " gate, " << reset << " epoch-boundary violations";
    return {"dead-zone freeze / reset exactness", freeze + gate + reset == 0, os.str()};
}

inline CheckResult gradient_oracle() {
    const ScalarSigmoidTarget target;
    const double h = 1e-6;
    double worst = 0.0;
    for (double a = -3.0; a <= 3.0; a += 1.5) {
        for (double c = -3.0; c <= 3.0; c += 1.5) {
            const double t = 4.0;
            const double fa = (target.g(t, a + h, c) - target.g(t, a - h, c)) / (2 * h);
            const double fc = (target.g(t, a, c + h) - target.g(t, a, c - h)) / (2 * h);
            worst = std::max(worst, std::abs(fa - target.dg_da(t, a, c)) / std::max(1e-12, std::abs(fa)));
            worst = std::max(worst, std::abs(fc - target.dg_dc(t, a)) / std::max(1e-12, std::abs(fc)));
        }
    }
    std::ostringstream os;
    os << "max relative deviation = " << worst;
    return {"sigmoid partials vs finite differences", worst < 1e-5, os.str()};
}

}  // namespace checks

inline std::vector<CheckResult> run_invariant_checks(std::uint64_t seed = 0) {
    return {checks::conversion_fidelity(seed), checks::round_trip(seed), checks::matched_descent(seed),
            checks::dead_zone_and_reset(), checks::gradient_oracle()};
}

}  // namespace logfit
