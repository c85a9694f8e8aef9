// logfit command-line tool.
//
// exit codes: 0 ok, 1 validation / usage error (or a failed `check`),
// 2 numerical divergence.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "logfit/logfit.hpp"

namespace fs = std::filesystem;
using namespace logfit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitDiverged = 2;

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

// --out wins, then LOGFIT_OUT, then the fallback
fs::path out_dir(const Globals& g, const char* fallback) {
    if (!g.out.empty()) return g.out;
    if (const char* env = std::getenv("LOGFIT_OUT"); env && *env) return env;
    return fallback;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

std::pair<double, double> parse_pair(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw ValidationError("init", "expected a,c");
    try {
        return {parse_double(s.substr(0, comma)), parse_double(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw ValidationError("init", "expected two numbers a,c, got \"" + s + "\"");
    }
}

// ---------------------------------------------------------------------------
// convert

int cmd_convert(const Globals& g) {
    json doc;
    try {
        doc = g.config.empty() ? json::parse(std::cin) : read_json_file(g.config);
    } catch (const json::parse_error& e) {
        throw ValidationError("input", e.what());
    }
    std::cout << convert_document(doc).dump(2) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
    std::string mode = "autonomous";
    double t_end = 10.0;
    double dt = 1e-3;
    std::string method = "rk4";
    std::int64_t stride = 10;
};

LogisticEnsemble ensemble_from(const json& doc) {
    if (doc.contains("logistic")) return logistic_from_json(doc.at("logistic"));
    if (doc.contains("sigmoid")) return sigmoid_to_logistic(sigmoid_from_json(doc.at("sigmoid")));
    throw ValidationError("input", "expected a {\"logistic\": ...} or {\"sigmoid\": ...} document");
}

std::function<double(double)> input_rate_from(const json& d, std::size_t j) {
    const std::string where = "multi_input.inputs[" + std::to_string(j) + "]";
    const auto kind = detail::get_or<std::string>(d, "kind", "constant", where);
    if (kind == "constant") {
        detail::reject_unknown_keys(d, {"kind", "value"}, where);
        const double v = detail::get_or(d, "value", 1.0, where);
        return [v](double) { return v; };
    }
    if (kind == "sine") {
        // rate = offset + amp * sin(omega t)
        detail::reject_unknown_keys(d, {"kind", "amp", "omega", "offset"}, where);
        const double amp = detail::get_or(d, "amp", 1.0, where);
        const double omega = detail::get_or(d, "omega", 1.0, where);
        const double offset = detail::get_or(d, "offset", 0.0, where);
        return [=](double t) { return offset + amp * std::sin(omega * t); };
    }
    throw ValidationError(where + ".kind", "expected \"constant\" or \"sine\"");
}

MultiInputSystem multi_input_from(const json& doc) {
    if (!doc.contains("multi_input")) throw ValidationError("input", "expected a {\"multi_input\": ...} document");
    const json& d = doc.at("multi_input");
    detail::reject_unknown_keys(d, {"alpha", "beta", "c_out", "x0", "inputs"}, "multi_input");
    MultiInputSystem sys;
    sys.c_out = detail::number_array(d, "c_out", "multi_input");
    sys.x0 = detail::number_array(d, "x0", "multi_input");
    sys.n = sys.x0.size();
    if (!d.contains("inputs") || !d.at("inputs").is_array()) {
        throw ValidationError("multi_input.inputs", "expected an array of input rates");
    }
    sys.m = d.at("inputs").size();
    for (std::size_t j = 0; j < sys.m; ++j) sys.input_rates.push_back(input_rate_from(d.at("inputs")[j], j));
    // alpha and beta: n rows of m entries
    auto matrix = [&](const char* key) {
        std::vector<double> flat;
        if (!d.contains(key) || !d.at(key).is_array()) {
            throw ValidationError(std::string("multi_input.") + key, "expected an n x m array");
        }
        for (const auto& row : d.at(key)) {
            if (!row.is_array()) throw ValidationError(std::string("multi_input.") + key, "rows must be arrays");
            for (const auto& v : row) {
                if (!v.is_number()) throw ValidationError(std::string("multi_input.") + key, "entries must be numbers");
                flat.push_back(v.get<double>());
            }
        }
        return flat;
    };
    sys.alpha = matrix("alpha");
    sys.beta = matrix("beta");
    sys.validate();
    return sys;
}

void write_simulation(std::ostream& os, const Trajectory& tr, std::size_t n, std::span<const double> c_out,
                      bool with_z) {
    os << 't';
    for (std::size_t i = 1; i <= n; ++i) os << ",x_" << i;
    os << ",y";
    if (with_z) os << ",z";
    os << '\n';
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        const auto& x = tr.x[k];
        os << format_double(tr.t[k]);
        for (std::size_t i = 0; i < n; ++i) os << ',' << format_double(x[i]);
        os << ',' << format_double(output(c_out, std::span<const double>(x.data(), n)));
        if (with_z) os << ',' << format_double(x[n]);
        os << '\n';
    }
}

int cmd_simulate(const Globals& g, const SimulateOpts& o) {
    if (g.config.empty()) throw ValidationError("config", "simulate needs --config PATH");
    const json doc = read_json_file(g.config);
    IntegratorConfig icfg{o.dt, o.method == "euler" ? Method::euler : Method::rk4};
    if (o.stride < 1) throw ValidationError("stride", "must be >= 1");

    Trajectory tr;
    std::size_t n = 0;
    std::vector<double> c_out;
    bool with_z = false;
    if (o.mode == "autonomous") {
        const LogisticEnsemble sys = ensemble_from(doc);
        tr = integrate_autonomous(sys, o.t_end, icfg, o.stride);
        n = sys.size();
        c_out = sys.c_out;
    } else if (o.mode == "feedback") {
        const LogisticEnsemble sys = ensemble_from(doc);
        sys.validate();
        n = sys.size();
        c_out = sys.c_out;
        with_z = true;
        std::vector<double> x0 = sys.x0;
        x0.push_back(0.0);
        auto f = [&sys, n](double, std::span<const double> xz) {
            FeedbackRates r = feedback_rhs(sys, xz.first(n));
            r.dx.push_back(r.dz);
            return r.dx;
        };
        tr = integrate_fixed(f, x0, o.t_end, icfg, o.stride);
    } else {
        const MultiInputSystem sys = multi_input_from(doc);
        n = sys.n;
        c_out = sys.c_out;
        auto f = [&sys](double t, std::span<const double> x) { return multiinput_rhs(sys, x, t); };
        tr = integrate_fixed(f, sys.x0, o.t_end, icfg, o.stride);
    }

    if (g.out.empty() && !std::getenv("LOGFIT_OUT")) {
        write_simulation(std::cout, tr, n, c_out, with_z);
    } else {
        const fs::path dir = out_dir(g, ".");
        ensure_dir(dir);
        const fs::path p = dir / "simulate.csv";
        auto out = detail::open_for_write(p);
        write_simulation(out, tr, n, c_out, with_z);
        detail::finish_write(out, p);
        if (!g.quiet) std::cerr << "wrote " << p.string() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// fit / example2

int report_trials(const Globals& g, const std::vector<TrialRecord>& records) {
    std::size_t diverged = 0;
    for (const auto& r : records) {
        if (r.status != TrialStatus::ok) {
            ++diverged;
            if (!g.quiet) std::cerr << "trial " << r.trial << " diverged: " << r.message << '\n';
        }
    }
    return diverged ? kExitDiverged : kExitOk;
}

int cmd_fit(const Globals& g, unsigned workers) {
    if (g.config.empty()) throw ValidationError("config", "fit needs --config PATH");
    ExperimentConfig cfg = load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    const std::string started = utc_timestamp();
    const auto records = run_trials(cfg, workers);
    const fs::path dir = out_dir(g, "logfit_out");
    const RunManifest m = emit_results(records, dir, config_to_json(cfg), started);
    if (!g.quiet) {
        std::cout << "trials: " << records.size() << "  digest: " << m.config_digest << "  out: " << dir.string()
                  << '\n';
    }
    return report_trials(g, records);
}

struct Example2Opts {
    std::string scale = "desk";
    std::optional<std::int64_t> epochs;
    std::optional<std::int64_t> trials;
    std::int64_t record_stride = 0;
    unsigned workers = 0;
};

int cmd_example2(const Globals& g, const Example2Opts& o) {
    ExperimentConfig cfg = g.config.empty() ? example2_config(o.scale == "full" ? Scale::full : Scale::desk)
                                            : load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.trials) cfg.trials = *o.trials;
    if (o.record_stride) cfg.record_stride = o.record_stride;
    cfg.validate();

    const std::string started = utc_timestamp();
    const Example2Summary s = example2(cfg, o.workers);
    const fs::path dir = out_dir(g, "logfit_out");
    ensure_dir(dir);

    std::vector<double> d0, d1, r0, r1;
    for (const auto& r : s.records) {
        d0.push_back(r.d0);
        d1.push_back(r.d_final);
        r0.push_back(r.R0);
        r1.push_back(r.R_final);
    }
    const fs::path hd = dir / "histogram_d.csv";
    const fs::path hr = dir / "histogram_R.csv";
    write_histogram_csv(histogram(d0, d1), hd);
    write_histogram_csv(histogram(r0, r1), hr);
    const RunManifest m = emit_results(s.records, dir, config_to_json(cfg), started, {hd.string(), hr.string()});

    if (!g.quiet) {
        std::cout << "trials            " << s.records.size() << '\n'
                  << "median d0         " << s.median_d0 << '\n'
                  << "median d_final    " << s.median_d_final << '\n'
                  << "d decreased       " << s.frac_d_decreased << '\n'
                  << "R decreased       " << s.frac_R_decreased << '\n'
                  << "tail flagged      " << s.frac_tail_flagged << '\n'
                  << "digest            " << m.config_digest << '\n';
    }
    return report_trials(g, s.records);
}

// ---------------------------------------------------------------------------
// example1

struct Example1Opts {
    std::string variant = "adaptive";
    std::string init = "-3,-3";
    std::optional<double> t_end;
};

int cmd_example1(const Globals& g, const Example1Opts& o) {
    Example1Settings st;
    if (o.t_end) st.t_end = *o.t_end;
    const Example1Variant v = o.variant == "pattern" ? Example1Variant::pattern
                              : o.variant == "batch" ? Example1Variant::batch
                                                     : Example1Variant::adaptive;
    const Example1Result r = example1(v, parse_pair(o.init), st);

    const fs::path dir = out_dir(g, "logfit_out");
    ensure_dir(dir);
    const fs::path p = dir / ("example1_" + o.variant + ".csv");
    auto out = detail::open_for_write(p);
    out << "t,a,c,beta_hat,J\n";
    for (const auto& s : r.samples) {
        out << format_double(s.t) << ',' << format_double(s.a) << ',' << format_double(s.c) << ','
            << format_double(s.beta_hat) << ',' << format_double(s.J) << '\n';
    }
    detail::finish_write(out, p);
    if (!g.quiet) {
        std::cout << "a_final " << r.a_final << "\nc_final " << r.c_final << "\nJ_final " << r.J_final << '\n';
        if (v == Example1Variant::adaptive) std::cout << "chart singularities " << r.chart_singularities << '\n';
        std::cout << "wrote " << p.string() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// check

int cmd_check(const Globals& g) {
    bool all = true;
    for (const auto& r : run_invariant_checks(g.seed.value_or(0))) {
        all = all && r.passed;
        if (!g.quiet || !r.passed) {
            std::cout << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  (" << r.detail << ")\n";
        }
    }
    return all ? kExitOk : kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sigmoid-sum parameter recovery through adaptive logistic ODEs", "logfit"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config, "JSON input or config file");
    app.add_option("--out", g.out, "output directory (env LOGFIT_OUT)");
    auto* seed_opt = app.add_option("--seed", seed, "root RNG seed");
    app.add_flag("--quiet", g.quiet, "suppress progress output");

    auto* convert = app.add_subcommand("convert", "sigmoid <-> logistic document on stdin (or --config) to stdout");

    SimulateOpts so;
    auto* simulate = app.add_subcommand("simulate", "forward run of an ensemble, CSV to stdout or --out");
    simulate->add_option("--mode", so.mode)->check(CLI::IsMember({"autonomous", "multi_input", "feedback"}));
    simulate->add_option("--t-end", so.t_end, "horizon")->check(CLI::PositiveNumber);
    simulate->add_option("--dt", so.dt, "step")->check(CLI::PositiveNumber);
    simulate->add_option("--method", so.method)->check(CLI::IsMember({"euler", "rk4"}));
    simulate->add_option("--stride", so.stride, "keep every k-th step");

    unsigned fit_workers = 0;
    auto* fit = app.add_subcommand("fit", "adaptive trials from --config; writes trials.csv and manifest.json");
    fit->add_option("--workers", fit_workers, "worker threads (0 = hardware)");

    Example1Opts e1;
    auto* ex1 = app.add_subcommand("example1", "single-sigmoid comparison");
    ex1->add_option("--variant", e1.variant)->check(CLI::IsMember({"adaptive", "pattern", "batch"}));
    ex1->add_option("--init", e1.init, "starting point a,c (adaptive: alpha_hat = a, beta_hat = a/c)");
    ex1->add_option("--t-end", e1.t_end, "simulated horizon (default 900)")->check(CLI::PositiveNumber);

    Example2Opts e2;
    auto* ex2 = app.add_subcommand("example2", "ten-sigmoid randomized study");
    ex2->add_option("--scale", e2.scale, "desk (short) or full (reference length)")->check(CLI::IsMember({"desk", "full"}));
    ex2->add_option("--epochs", e2.epochs, "override epoch count");
    ex2->add_option("--trials", e2.trials, "override trial count");
    ex2->add_option("--record-stride", e2.record_stride, "steps between trace rows (0 = none)");
    ex2->add_option("--workers", e2.workers, "worker threads (0 = hardware)");

    auto* check = app.add_subcommand("check", "run the invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return kExitInvalid;
    }
    if (seed_opt->count() > 0) g.seed = seed;

    try {
        if (*convert) return cmd_convert(g);
        if (*simulate) return cmd_simulate(g, so);
        if (*fit) return cmd_fit(g, fit_workers);
        if (*ex1) return cmd_example1(g, e1);
        if (*ex2) return cmd_example2(g, e2);
        if (*check) return cmd_check(g);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    return kExitInvalid;
}
