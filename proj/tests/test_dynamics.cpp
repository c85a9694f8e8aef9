#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "logfit/dynamics.hpp"
#include "logfit/integrator.hpp"
#include "logfit/harness.hpp"

using namespace logfit;

namespace {

// sum over the c and x0 tables, done by hand in exact decimals
constexpr double kExample2OutputAtX0 = -0.19;

const ResetSchedule kSched{2.0, 1.0, 10.0, 10.0, false};

Plant scalar_plant() { return Plant{{2.0 / 3.0}, {-1.0 / 3.0}, {1.0}, {0.1}}; }

}  // namespace

TEST(LambdaGate, PeriodicWindow) {
    EXPECT_EQ(lambda_gate(0.5, 0.0, kSched), 0);
    EXPECT_EQ(lambda_gate(2.5, 0.0, kSched), 1);
    EXPECT_EQ(lambda_gate(3.0, 0.0, kSched), 0);
    EXPECT_EQ(lambda_gate(5.5, 0.0, kSched), 1);
}

TEST(LambdaGate, NormTrigger) {
    EXPECT_EQ(lambda_gate(0.5, 10.0, kSched), 1);
    EXPECT_EQ(lambda_gate(0.5, 9.999, kSched), 0);
    ResetSchedule open = kSched;
    open.D = std::numeric_limits<double>::infinity();
    EXPECT_EQ(lambda_gate(0.5, 1e300, open), 0);
}

TEST(ResetSchedule, Validation) {
    EXPECT_NO_THROW(kSched.validate());
    ResetSchedule weak = kSched;
    weak.l0 = 9.0;
    EXPECT_THROW(weak.validate(), ValidationError);
    ResetSchedule bad = kSched;
    bad.dT2 = 0.0;
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Signum, CaseTable) {
    const std::vector<double> v{3.0, -0.1, 0.0};
    EXPECT_EQ(signum_vec(v), (std::vector<double>{1.0, -1.0, 0.0}));
    EXPECT_EQ(signum_vec(std::vector<double>(4, 0.0)), std::vector<double>(4, 0.0));
}

TEST(Output, Sums) {
    const std::vector<double> ones(5, 1.0), x{0.1, 0.2, 0.3, 0.4, 0.5};
    EXPECT_NEAR(output(ones, x), 1.5, 1e-15);
    EXPECT_EQ(output(ones, std::vector<double>(5, 0.0)), 0.0);
    const auto cfg = example2_config();
    EXPECT_NEAR(output(cfg.sys.c_out, cfg.sys.x0), kExample2OutputAtX0, 1e-14);
}

TEST(ReferenceRhs, ActiveAndReset) {
    const Plant p = scalar_plant();
    ResetSchedule s = kSched;
    s.l0 = 10.0;
    EXPECT_NEAR(reference_rhs(std::vector<double>{0.1}, p, s, 0)[0], 2.0 / 30.0 - 1.0 / 300.0, 1e-16);
    EXPECT_EQ(reference_rhs(std::vector<double>{0.1}, p, s, 1)[0], 0.0);
    EXPECT_EQ(reference_rhs(std::vector<double>{0.7}, p, s, 1)[0], -10.0);
    EXPECT_EQ(reference_rhs(std::vector<double>{-0.7}, p, s, 1)[0], 10.0);
}

TEST(TrackingRhs, MatchesReferenceWhenMatched) {
    const Plant p{{1.0, -2.0}, {-0.5, 1.0}, {1.0, 2.0}, {0.2, 0.3}};
    AdaptiveState st;
    st.alpha_hat = p.alpha;
    st.q_hat = p.q;
    st.K = {-3.0, 4.0};
    const std::vector<double> x{0.4, 0.6};
    EXPECT_EQ(tracking_rhs(x, 0.0, st, p.x0, kSched, 0), reference_rhs(x, p, kSched, 0));
    const auto reset = tracking_rhs(x, 5.0, st, p.x0, kSched, 1);
    EXPECT_EQ(reset, (std::vector<double>{-10.0, -10.0}));
}

TEST(AdaptationRhs, DeadZoneAndGateFreeze) {
    AdaptiveState st;
    st.x = st.x_hat = {0.3, 0.4};
    st.alpha_hat = {1.0, 1.0};
    st.q_hat = {-1.0, -1.0};
    st.K = {0.0, 0.0};
    AdaptationConfig cfg;
    cfg.param = Parameterization::independent;
    cfg.delta = 0.1;
    const std::vector<double> c{1.0, -2.0};
    const std::vector<double> zero(2, 0.0);
    for (double e : {0.0, 0.05, -0.1}) {
        const auto r = adaptation_rhs(st, e, cfg, c, 0);
        EXPECT_EQ(r.dalpha, zero);
        EXPECT_EQ(r.dq, zero);
        EXPECT_EQ(r.dK, zero);
    }
    const auto gated = adaptation_rhs(st, 1.0, cfg, c, 1);
    EXPECT_EQ(gated.dalpha, zero);
    EXPECT_EQ(gated.dK, zero);
}

TEST(AdaptationRhs, IndependentLaw) {
    AdaptiveState st;
    st.x = st.x_hat = {0.5};
    st.alpha_hat = {1.0};
    st.q_hat = {-1.0};
    st.K = {0.0};
    AdaptationConfig cfg;
    cfg.param = Parameterization::independent;
    cfg.gamma = 0.5;
    cfg.delta = 0.0;
    const std::vector<double> c{2.0};
    const auto r = adaptation_rhs(st, 0.4, cfg, c, 0);
    EXPECT_NEAR(r.dalpha[0], -0.5 * 0.4 * 2.0 * 0.5, 1e-15);
    EXPECT_NEAR(r.dq[0], -0.5 * 0.4 * 2.0 * 0.25, 1e-15);
    EXPECT_NEAR(r.dK[0], -0.5 * 0.16 * 2.0, 1e-15);
}

TEST(AdaptationRhs, TiedLawKeepsQuadraticProportional) {
    AdaptiveState st;
    st.x = st.x_hat = {0.5};
    st.alpha_hat = {1.0};
    st.q_hat = {-2.0};
    st.K = {0.0};
    AdaptationConfig cfg;
    cfg.param = Parameterization::tied;
    cfg.known_beta = {2.0};
    cfg.gamma = 1.0;
    cfg.delta = 0.0;
    const std::vector<double> c{1.0};
    const auto r = adaptation_rhs(st, 1.0, cfg, c, 0);
    EXPECT_NEAR(r.dalpha[0], -(0.5 - 2.0 * 0.25), 1e-15);
    EXPECT_NEAR(r.dq[0], -2.0 * r.dalpha[0], 1e-15);
}

TEST(Kstar, ScalarExample) {
    const std::vector<double> c{1.0};
    const auto k = kstar_from_bound(c, 10.0, 0.2, 0.1);
    EXPECT_LT(k[0], -100.0);
    EXPECT_NEAR(k[0], -101.0, 1e-9);
}

TEST(Kstar, AlignedWithOutputWeights) {
    const Plant p{{1.0, 2.0}, {-1.0, -2.0}, {1.0, -2.0}, {0.1, 0.1}};
    const auto k = kstar_bound(p, 1.0, 0.1, 0.01);
    const double d2 = 1.0 * (2 * 1 + 4 * 1) + 2.0 * (2 * 2 + 4 * 2);
    EXPECT_NEAR(state_difference_bound(p, 1.0), d2, 1e-12);
    EXPECT_NEAR(output(p.c, k), -1.01 * d2 / 0.09, 1e-9);
    EXPECT_NEAR(k[0] / p.c[0], k[1] / p.c[1], 1e-9);
}

TEST(Kstar, Rejects) {
    const std::vector<double> zero{0.0}, one{1.0};
    EXPECT_THROW(kstar_from_bound(zero, 1.0, 0.2, 0.1), ValidationError);
    EXPECT_THROW(kstar_from_bound(one, 1.0, 0.1, 0.2), ValidationError);
    EXPECT_THROW(kstar_from_bound(one, 1.0, 0.1, 0.0), ValidationError);
}

TEST(Lyapunov, ZeroAtTruthInsideDeadZone) {
    const Plant p = scalar_plant();
    AdaptiveState st;
    st.alpha_hat = p.alpha;
    st.q_hat = p.q;
    st.K = {-5.0};
    AdaptationConfig cfg;
    cfg.delta = 0.1;
    const std::vector<double> k{-5.0};
    EXPECT_EQ(lyapunov_value(st, 0.05, p, k, cfg), 0.0);
    EXPECT_NEAR(lyapunov_value(st, 0.2, p, k, cfg), 0.5 * (0.04 - 0.01), 1e-15);
}

TEST(ProgressBound, ZeroLengthInterval) {
    AdaptationConfig cfg;
    ProgressHistory h;
    h.alpha_true = {1.0};
    h.q_true = {-1.0};
    h.start = {0.0, {2.0}, {-3.0}, {0.5}};
    h.end = h.start;
    h.times = {0.0};
    h.integrand = {0.0};
    const std::vector<double> k{-1.0};
    const auto b = progress_bound(h, k, cfg);
    EXPECT_EQ(b.lhs, 0.0);
    EXPECT_EQ(b.rhs, 0.0);
    EXPECT_TRUE(b.holds());
}

TEST(ProgressBound, FrozenRunIsZero) {
    AdaptationConfig cfg;
    cfg.delta = 0.5;
    const std::vector<double> k{-2.0}, c{1.0};
    ProgressHistory h;
    h.alpha_true = {1.0};
    h.q_true = {-1.0};
    h.start = {0.0, {2.0}, {-3.0}, {0.5}};
    h.end = {1.0, {2.0}, {-3.0}, {0.5}};
    for (double t = 0.0; t <= 1.0; t += 0.25) {
        h.times.push_back(t);
        h.integrand.push_back(progress_integrand(0.3, 0, k, c, cfg));
    }
    const auto b = progress_bound(h, k, cfg);
    EXPECT_EQ(b.lhs, 0.0);
    EXPECT_EQ(b.rhs, 0.0);
}

TEST(ProgressIntegrand, GateAndDeadZone) {
    AdaptationConfig cfg;
    cfg.delta = 0.1;
    const std::vector<double> k{-2.0, 4.0}, c{1.0, 3.0};
    EXPECT_EQ(progress_integrand(0.5, 1, k, c, cfg), 0.0);
    EXPECT_EQ(progress_integrand(0.05, 0, k, c, cfg), 0.0);
    EXPECT_NEAR(progress_integrand(-0.5, 0, k, c, cfg), 0.5 * 10.0, 1e-15);
}

TEST(MultiInput, FrozenInputs) {
    MultiInputSystem sys{2, 2, {1, 2, 3, 4}, {1, 1, 1, 1}, {1, 1}, {0.2, 0.3},
                         {[](double) { return 0.0; }, [](double) { return 0.0; }}};
    sys.validate();
    EXPECT_EQ(multiinput_rhs(sys, sys.x0, 1.0), std::vector<double>(2, 0.0));
}

TEST(MultiInput, UnitRateIsAutonomous) {
    const LogisticEnsemble ens{{0.7, -1.5}, {1.0, 2.0}, {1.0, 1.0}, {0.3, 0.2}};
    MultiInputSystem sys{2, 1, ens.alpha, ens.beta, ens.c_out, ens.x0, {[](double) { return 1.0; }}};
    const std::vector<double> x{0.45, 0.1};
    const auto d = multiinput_rhs(sys, x, 3.0);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(d[i], ens.alpha[i] * x[i] * (1.0 - ens.beta[i] * x[i]));
}

TEST(MultiInput, DoubleRateRescalesTime) {
    const LogisticEnsemble ens{{0.7, -1.5}, {1.0, 1.0}, {1.0, 1.0}, {0.3, 0.6}};
    MultiInputSystem sys{2, 1, ens.alpha, ens.beta, ens.c_out, ens.x0, {[](double) { return 2.0; }}};
    const IntegratorConfig icfg{1e-3, Method::rk4};
    const auto fast = integrate_fixed([&](double t, std::span<const double> x) { return multiinput_rhs(sys, x, t); },
                                      sys.x0, 4.0, icfg, 10);
    const auto slow = integrate_autonomous(ens, 8.0, icfg, 20);
    ASSERT_EQ(fast.t.size(), slow.t.size());
    for (std::size_t k = 0; k < fast.t.size(); ++k) {
        for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(fast.x[k][i], slow.x[k][i], 1e-6);
    }
}

TEST(MultiInput, Validation) {
    MultiInputSystem sys{2, 1, {1.0}, {1.0, 1.0}, {1, 1}, {0.1, 0.1}, {[](double) { return 1.0; }}};
    EXPECT_THROW(sys.validate(), ValidationError);
}

TEST(Feedback, Equilibria) {
    const LogisticEnsemble ens{{1.0, 2.0}, {1.0, 1.0}, {1.0, -1.0}, {0.0, 0.0}};
    const std::vector<double> zero{0.0, 0.0};
    auto r = feedback_rhs(ens, zero);
    EXPECT_EQ(r.dx, zero);
    EXPECT_EQ(r.dz, 0.0);
    const std::vector<double> balanced{0.4, 0.4};
    r = feedback_rhs(ens, balanced);
    EXPECT_EQ(r.dx, zero);
    EXPECT_EQ(r.dz, 0.0);
}

TEST(Feedback, IntegralStateMatchesQuadrature) {
    const LogisticEnsemble ens{{0.8, -0.5}, {1.0, 1.0}, {1.0, 0.5}, {0.2, 0.7}};
    const std::size_t n = 2;
    std::vector<double> z0 = ens.x0;
    z0.push_back(0.0);
    auto f = [&](double, std::span<const double> xz) {
        auto r = feedback_rhs(ens, xz.first(n));
        r.dx.push_back(r.dz);
        return r.dx;
    };
    const auto tr = integrate_fixed(f, z0, 5.0, IntegratorConfig{1e-3, Method::rk4}, 1);
    // Simpson on the sampled output
    const std::size_t N = tr.t.size() - 1;
    ASSERT_EQ(N % 2, 0u);
    double s = 0.0;
    for (std::size_t k = 0; k <= N; ++k) {
        const double y = output(ens.c_out, std::span<const double>(tr.x[k].data(), n));
        s += (k == 0 || k == N ? 1.0 : (k % 2 ? 4.0 : 2.0)) * y;
    }
    s *= 1e-3 / 3.0;
    EXPECT_NEAR(tr.x.back()[n], s, 1e-9);
}
