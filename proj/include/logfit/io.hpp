#pragma once

// Config ingestion (JSON), result persistence (CSV + JSON manifest) and the
// document formats used by the command-line tool.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "logfit/core_model.hpp"
#include "logfit/errors.hpp"
#include "logfit/harness.hpp"

namespace logfit {

using json = nlohmann::json;

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValidationError("csv", "not a number: '" + s + "'");
    }
    return v;
}

// ---------------------------------------------------------------------------
// Model documents.

namespace detail {

inline std::vector<double> number_array(const json& doc, const std::string& key, const std::string& where) {
    if (!doc.contains(key)) throw ValidationError(where + "." + key, "missing");
    const json& v = doc.at(key);
    if (!v.is_array()) throw ValidationError(where + "." + key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) {
            throw ValidationError(where + "." + key + "[" + std::to_string(i) + "]", "expected a number");
        }
        out.push_back(v[i].get<double>());
    }
    return out;
}

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where, "expected an object");
    for (const auto& [k, _] : obj.items()) {
        if (!allowed.count(k)) throw ValidationError(where.empty() ? k : where + "." + k, "unknown key");
    }
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(where.empty() ? key : where + "." + key, std::string("wrong type: ") + e.what());
    }
}

}  // namespace detail

inline json to_json(const SigmoidSum& m) { return json{{"a", m.a}, {"b", m.b}, {"c", m.c}}; }

inline json to_json(const LogisticEnsemble& s) {
    return json{{"alpha", s.alpha}, {"beta", s.beta}, {"c_out", s.c_out}, {"x0", s.x0}};
}

inline SigmoidSum sigmoid_from_json(const json& doc) {
    detail::reject_unknown_keys(doc, {"a", "b", "c"}, "sigmoid");
    SigmoidSum m{detail::number_array(doc, "a", "sigmoid"), detail::number_array(doc, "b", "sigmoid"),
                 detail::number_array(doc, "c", "sigmoid")};
    m.validate();
    return m;
}

inline LogisticEnsemble logistic_from_json(const json& doc, const std::string& where = "logistic") {
    detail::reject_unknown_keys(doc, {"alpha", "beta", "c_out", "x0"}, where);
    LogisticEnsemble s;
    s.alpha = detail::number_array(doc, "alpha", where);
    s.beta = doc.contains("beta") ? detail::number_array(doc, "beta", where) : std::vector<double>(s.alpha.size(), 1.0);
    s.c_out = doc.contains("c_out") ? detail::number_array(doc, "c_out", where)
                                    : std::vector<double>(s.alpha.size(), 1.0);
    s.x0 = detail::number_array(doc, "x0", where);
    s.validate();
    return s;
}

/// {"sigmoid": {...}} becomes {"logistic": {...}} and vice versa.
inline json convert_document(const json& doc) {
    if (doc.is_object() && doc.size() == 1 && doc.contains("sigmoid")) {
        return json{{"logistic", to_json(sigmoid_to_logistic(sigmoid_from_json(doc.at("sigmoid"))))}};
    }
    if (doc.is_object() && doc.size() == 1 && doc.contains("logistic")) {
        return json{{"sigmoid", to_json(logistic_to_sigmoid(logistic_from_json(doc.at("logistic"))))}};
    }
    throw ValidationError("document", "expected exactly one of \"sigmoid\" or \"logistic\" at top level");
}

// ---------------------------------------------------------------------------
// Experiment config.

inline const char* to_string(Parameterization p) noexcept {
    return p == Parameterization::tied ? "tied" : "independent";
}

inline const char* to_string(Method m) noexcept { return m == Method::rk4 ? "rk4" : "euler"; }

/// Fully resolved config as a JSON document. An infinite D is written as null.
inline json config_to_json(const ExperimentConfig& cfg) {
    json sched{{"T", cfg.sched.T},
               {"dT2", cfg.sched.dT2},
               {"D", std::isfinite(cfg.sched.D) ? json(cfg.sched.D) : json(nullptr)},
               {"l0", cfg.sched.l0},
               {"latched", cfg.sched.latched}};
    json out{{"system", to_json(cfg.sys)},
             {"schedule", sched},
             {"adaptation",
              {{"gamma", cfg.acfg.gamma},
               {"delta", cfg.acfg.delta},
               {"delta1", cfg.acfg.delta1},
               {"adapt_gain", cfg.acfg.adapt_gain},
               {"parameterization", to_string(cfg.acfg.param)}}},
             {"integrator", {{"dt", cfg.icfg.dt}, {"method", to_string(cfg.icfg.method)}}},
             {"epochs", cfg.epochs},
             {"trials", cfg.trials},
             {"seed", cfg.seed},
             {"init_box", {{"lo", cfg.init_box.lo}, {"hi", cfg.init_box.hi}}},
             {"record_stride", cfg.record_stride},
             {"tail_epochs", cfg.tail_epochs}};
    if (!cfg.beta_hat0.empty()) out["beta_hat0"] = cfg.beta_hat0;
    if (!cfg.K0.empty()) out["K0"] = cfg.K0;
    return out;
}

/// Parses a config document on top of the ten-sigmoid desk defaults and
/// validates every invariant. Errors name the offending field.
inline ExperimentConfig config_from_json(const json& doc) {
    using detail::get_or;
    detail::reject_unknown_keys(doc,
                                {"system", "schedule", "adaptation", "integrator", "epochs", "trials", "seed",
                                 "init_box", "record_stride", "beta_hat0", "K0", "tail_epochs"},
                                "");
    ExperimentConfig cfg = example2_config(Scale::desk);
    if (doc.contains("system")) cfg.sys = logistic_from_json(doc.at("system"), "system");
    if (doc.contains("schedule")) {
        const json& s = doc.at("schedule");
        detail::reject_unknown_keys(s, {"T", "dT2", "D", "l0", "latched"}, "schedule");
        cfg.sched.T = get_or(s, "T", cfg.sched.T, "schedule");
        cfg.sched.dT2 = get_or(s, "dT2", cfg.sched.dT2, "schedule");
        if (s.contains("D")) {
            cfg.sched.D = s.at("D").is_null() ? std::numeric_limits<double>::infinity()
                                              : get_or(s, "D", cfg.sched.D, "schedule");
        }
        cfg.sched.l0 = get_or(s, "l0", cfg.sched.l0, "schedule");
        cfg.sched.latched = get_or(s, "latched", cfg.sched.latched, "schedule");
    }
    if (doc.contains("adaptation")) {
        const json& a = doc.at("adaptation");
        detail::reject_unknown_keys(a, {"gamma", "delta", "delta1", "adapt_gain", "parameterization"}, "adaptation");
        cfg.acfg.gamma = get_or(a, "gamma", cfg.acfg.gamma, "adaptation");
        cfg.acfg.delta = get_or(a, "delta", cfg.acfg.delta, "adaptation");
        cfg.acfg.delta1 = get_or(a, "delta1", cfg.acfg.delta1, "adaptation");
        cfg.acfg.adapt_gain = get_or(a, "adapt_gain", cfg.acfg.adapt_gain, "adaptation");
        const auto p = get_or<std::string>(a, "parameterization", to_string(cfg.acfg.param), "adaptation");
        if (p == "tied") cfg.acfg.param = Parameterization::tied;
        else if (p == "independent") cfg.acfg.param = Parameterization::independent;
        else throw ValidationError("adaptation.parameterization", "expected \"tied\" or \"independent\"");
    }
    cfg.acfg.known_beta = cfg.sys.beta;
    if (doc.contains("integrator")) {
        const json& i = doc.at("integrator");
        detail::reject_unknown_keys(i, {"dt", "method"}, "integrator");
        cfg.icfg.dt = get_or(i, "dt", cfg.icfg.dt, "integrator");
        const auto m = get_or<std::string>(i, "method", to_string(cfg.icfg.method), "integrator");
        if (m == "euler") cfg.icfg.method = Method::euler;
        else if (m == "rk4") cfg.icfg.method = Method::rk4;
        else throw ValidationError("integrator.method", "expected \"euler\" or \"rk4\"");
    }
    cfg.epochs = get_or(doc, "epochs", cfg.epochs, "");
    cfg.trials = get_or(doc, "trials", cfg.trials, "");
    cfg.seed = get_or(doc, "seed", cfg.seed, "");
    if (doc.contains("init_box")) {
        const json& b = doc.at("init_box");
        detail::reject_unknown_keys(b, {"lo", "hi"}, "init_box");
        cfg.init_box.lo = get_or(b, "lo", cfg.init_box.lo, "init_box");
        cfg.init_box.hi = get_or(b, "hi", cfg.init_box.hi, "init_box");
    }
    cfg.record_stride = get_or(doc, "record_stride", cfg.record_stride, "");
    cfg.tail_epochs = get_or(doc, "tail_epochs", cfg.tail_epochs, "");
    if (doc.contains("beta_hat0")) cfg.beta_hat0 = detail::number_array(doc, "beta_hat0", "");
    if (doc.contains("K0")) cfg.K0 = detail::number_array(doc, "K0", "");
    cfg.validate();
    return cfg;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config", path.string() + ": " + e.what());
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    return config_from_json(read_json_file(path));
}

/// FNV-1a 64 over the canonical dump (object keys sorted), as 16 hex digits.
inline std::string config_digest(const json& resolved) {
    const std::string text = resolved.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---------------------------------------------------------------------------
// Results.

struct RunManifest {
    std::string config_digest;
    std::string artifact_version = kArtifactVersion;
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;

    json to_json() const {
        return json{{"config_digest", config_digest},
                    {"artifact_version", artifact_version},
                    {"started", started},
                    {"finished", finished},
                    {"outputs", outputs}};
    }
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

inline void finish_write(std::ofstream& out, const std::filesystem::path& p) {
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + p.string());
}

}  // namespace detail

inline constexpr const char* kTrialsHeader = "trial,seed,d0,d_final,R0,R_final,status";

inline void write_trials_csv(const std::vector<TrialRecord>& records, const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    out << kTrialsHeader << '\n';
    for (const auto& r : records) {
        out << r.trial << ',' << r.seed << ',' << format_double(r.d0) << ',' << format_double(r.d_final) << ','
            << format_double(r.R0) << ',' << format_double(r.R_final) << ',' << to_string(r.status) << '\n';
    }
    detail::finish_write(out, path);
}

inline void write_trace_csv(const TrialRecord& r, const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    const std::size_t n = r.trace.empty() ? 0 : r.trace.front().alpha_hat.size();
    out << "t,e,lambda,d,R";
    for (std::size_t i = 1; i <= n; ++i) out << ",alpha_hat_" << i;
    for (std::size_t i = 1; i <= n; ++i) out << ",K_" << i;
    out << '\n';
    for (const auto& row : r.trace) {
        out << format_double(row.t) << ',' << format_double(row.e) << ',' << row.lambda << ','
            << format_double(row.d) << ',' << format_double(row.R);
        for (double v : row.alpha_hat) out << ',' << format_double(v);
        for (double v : row.K) out << ',' << format_double(v);
        out << '\n';
    }
    detail::finish_write(out, path);
}

inline void write_histogram_csv(const std::vector<HistogramBin>& bins, const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    out << "bin_lo,bin_hi,start,end\n";
    for (const auto& b : bins) {
        out << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.start << ',' << b.end << '\n';
    }
    detail::finish_write(out, path);
}

/// Parses trials.csv back into records (trace fields left empty).
inline std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kTrialsHeader) throw ValidationError("trials.csv", "unexpected header: " + line);
    std::vector<TrialRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 7) throw ValidationError("trials.csv", "expected 7 fields: " + line);
        TrialRecord r;
        r.trial = std::stoull(f[0]);
        r.seed = std::stoull(f[1]);
        r.d0 = parse_double(f[2]);
        r.d_final = parse_double(f[3]);
        r.R0 = parse_double(f[4]);
        r.R_final = parse_double(f[5]);
        r.status = f[6] == "ok" ? TrialStatus::ok : TrialStatus::diverged;
        out.push_back(std::move(r));
    }
    return out;
}

/// Writes trials.csv, one trace file per trial that recorded one, and
/// manifest.json into `dir` (created if needed).
inline RunManifest emit_results(const std::vector<TrialRecord>& records, const std::filesystem::path& dir,
                                const json& resolved_config, std::string started = {},
                                std::vector<std::string> extra_outputs = {}) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    RunManifest m;
    m.config_digest = config_digest(resolved_config);
    m.started = started.empty() ? utc_timestamp() : std::move(started);
    write_trials_csv(records, dir / "trials.csv");
    m.outputs.push_back((dir / "trials.csv").string());
    for (const auto& r : records) {
        if (r.trace.empty()) continue;
        const auto p = dir / ("trial_" + std::to_string(r.trial) + "_trace.csv");
        write_trace_csv(r, p);
        m.outputs.push_back(p.string());
    }
    for (auto& extra : extra_outputs) m.outputs.push_back(std::move(extra));
    const auto manifest_path = dir / "manifest.json";
    m.outputs.push_back(manifest_path.string());
    m.finished = utc_timestamp();
    json doc = m.to_json();
    doc["config"] = resolved_config;
    auto out = detail::open_for_write(manifest_path);
    out << doc.dump(2) << '\n';
    detail::finish_write(out, manifest_path);
    return m;
}

}  // namespace logfit
