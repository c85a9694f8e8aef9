#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "logfit/io.hpp"
#include "logfit/rng.hpp"

using namespace logfit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("logfit_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig expect_invalid(const json& doc, const std::string& field) {
    try {
        config_from_json(doc);
        ADD_FAILURE() << "accepted " << doc.dump();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), field) << e.what();
    }
    return {};
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
    Xoshiro256ss rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double v = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng() % 200) - 100);
        EXPECT_EQ(parse_double(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_TRUE(std::isnan(parse_double(format_double(NAN))));
    EXPECT_EQ(parse_double(format_double(-INFINITY)), -INFINITY);
    EXPECT_THROW(parse_double("1.5x"), ValidationError);
}

TEST(Convert, SigmoidDocument) {
    const json in = json::parse(R"({"sigmoid": {"a": [0.6666666666666666], "b": [2.944], "c": [2]}})");
    const json out = convert_document(in);
    ASSERT_TRUE(out.contains("logistic"));
    EXPECT_DOUBLE_EQ(out["logistic"]["alpha"][0].get<double>(), 2.0 / 3.0);
    EXPECT_EQ(out["logistic"]["c_out"][0].get<double>(), 2.0);
    const json back = convert_document(out);
    EXPECT_NEAR(back["sigmoid"]["b"][0].get<double>(), 2.944, 1e-12);
}

TEST(Convert, Rejects) {
    EXPECT_THROW(convert_document(json::parse(R"({"neither": {}})")), ValidationError);
    EXPECT_THROW(convert_document(json::parse(R"({"sigmoid": {"a": [1], "b": [0]}})")), ValidationError);
    EXPECT_THROW(convert_document(json::parse(R"({"sigmoid": {"a": [1], "b": [0], "c": ["x"]}})")),
                 ValidationError);
    EXPECT_THROW(convert_document(json::parse(R"({"sigmoid": {"a": [1], "b": [0], "c": [1], "d": 1}})")),
                 ValidationError);
}

TEST(Config, DefaultsApplied) {
    const ExperimentConfig cfg = config_from_json(json::object());
    EXPECT_EQ(cfg.icfg.dt, 1e-4);
    EXPECT_EQ(cfg.sys.size(), 10u);
    const ExperimentConfig c2 = config_from_json(json::parse(R"({"integrator": {"method": "rk4"}})"));
    EXPECT_EQ(c2.icfg.dt, 1e-4);
    EXPECT_EQ(c2.icfg.method, Method::rk4);
}

TEST(Config, InvariantViolationsNameTheField) {
    expect_invalid(json::parse(R"({"schedule": {"l0": 9}})"), "schedule.l0");
    expect_invalid(json::parse(R"({"integrator": {"dt": 0.0007}})"), "T1");
    expect_invalid(json::parse(R"({"init_box": {"lo": 5, "hi": 5}})"), "init_box");
    expect_invalid(json::parse(R"({"bogus": 1})"), "bogus");
    expect_invalid(json::parse(R"({"adaptation": {"gamma": -1}})"), "adaptation.gamma");
    expect_invalid(json::parse(R"({"adaptation": {"gamma": "big"}})"), "adaptation.gamma");
    expect_invalid(json::parse(R"({"epochs": 0})"), "epochs");
}

TEST(Config, RoundTripThroughJson) {
    ExperimentConfig cfg = example2_config(Scale::desk, 99);
    cfg.sched.D = std::numeric_limits<double>::infinity();
    cfg.K0.assign(10, -1.0);
    const json doc = config_to_json(cfg);
    EXPECT_TRUE(doc["schedule"]["D"].is_null());
    const ExperimentConfig back = config_from_json(doc);
    EXPECT_EQ(config_to_json(back), doc);
    EXPECT_TRUE(std::isinf(back.sched.D));
}

TEST(Config, LoadFromFile) {
    const auto dir = scratch("load");
    std::ofstream(dir / "c.json") << R"({"epochs": 5, "seed": 3})";
    const ExperimentConfig cfg = load_config(dir / "c.json");
    EXPECT_EQ(cfg.epochs, 5);
    EXPECT_EQ(cfg.seed, 3u);
    std::ofstream(dir / "bad.json") << "{not json";
    EXPECT_THROW(load_config(dir / "bad.json"), ValidationError);
    EXPECT_THROW(load_config(dir / "missing.json"), ValidationError);
}

TEST(Digest, StableUnderKeyOrder) {
    const json a = json::parse(R"({"epochs": 5, "seed": 3, "adaptation": {"gamma": 0.1, "delta": 0.01}})");
    const json b = json::parse(R"({"adaptation": {"delta": 0.01, "gamma": 0.1}, "seed": 3, "epochs": 5})");
    EXPECT_EQ(config_digest(a), config_digest(b));
    EXPECT_EQ(config_digest(a).size(), 16u);
}

TEST(Digest, DistinctConfigsDistinctDigests) {
    std::set<std::string> seen;
    std::size_t count = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (double gamma : {0.001, 0.002, 0.01}) {
            for (std::int64_t epochs : {1, 2000}) {
                ExperimentConfig cfg = example2_config(Scale::desk, seed);
                cfg.acfg.gamma = gamma;
                cfg.epochs = epochs;
                seen.insert(config_digest(config_to_json(cfg)));
                ++count;
            }
        }
    }
    EXPECT_EQ(seen.size(), count);
}

TEST(TrialsCsv, RoundTrip) {
    Xoshiro256ss rng(8);
    std::vector<TrialRecord> recs;
    for (std::size_t i = 0; i < 50; ++i) {
        TrialRecord r;
        r.trial = i;
        r.seed = rng();
        r.d0 = rng.uniform(0, 20);
        r.d_final = i == 7 ? NAN : rng.uniform(0, 20);
        r.R0 = rng.uniform(0, 1) * 1e-7;
        r.R_final = rng.uniform(0, 1);
        r.status = i == 7 ? TrialStatus::diverged : TrialStatus::ok;
        recs.push_back(r);
    }
    const auto dir = scratch("csv");
    write_trials_csv(recs, dir / "trials.csv");
    const auto back = read_trials_csv(dir / "trials.csv");
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(back[i].trial, recs[i].trial);
        EXPECT_EQ(back[i].seed, recs[i].seed);
        EXPECT_EQ(back[i].d0, recs[i].d0);
        if (i == 7) EXPECT_TRUE(std::isnan(back[i].d_final));
        else EXPECT_EQ(back[i].d_final, recs[i].d_final);
        EXPECT_EQ(back[i].R0, recs[i].R0);
        EXPECT_EQ(back[i].R_final, recs[i].R_final);
        EXPECT_EQ(back[i].status, recs[i].status);
    }
}

TEST(EmitResults, EmptyBatch) {
    const auto dir = scratch("empty");
    const RunManifest m = emit_results({}, dir, config_to_json(example2_config()));
    EXPECT_EQ(slurp(dir / "trials.csv"), std::string(kTrialsHeader) + "\n");
    const json doc = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(doc["config_digest"], m.config_digest);
    EXPECT_EQ(doc["artifact_version"], kArtifactVersion);
    EXPECT_EQ(doc["outputs"].size(), 2u);
}

TEST(EmitResults, TracesAndDeterministicBytes) {
    ExperimentConfig cfg = example2_config(Scale::desk, 5);
    cfg.icfg.dt = 1e-3;
    cfg.epochs = 2;
    cfg.trials = 3;
    cfg.record_stride = 500;
    const auto a = scratch("det_a"), b = scratch("det_b");
    const RunManifest ma = emit_results(run_trials(cfg, 2), a, config_to_json(cfg));
    emit_results(run_trials(cfg, 1), b, config_to_json(cfg));
    EXPECT_EQ(slurp(a / "trials.csv"), slurp(b / "trials.csv"));
    EXPECT_EQ(slurp(a / "trial_1_trace.csv"), slurp(b / "trial_1_trace.csv"));
    EXPECT_EQ(ma.outputs.size(), 1u + 3u + 1u);
    for (const auto& p : ma.outputs) EXPECT_TRUE(fs::exists(p)) << p;

    std::ifstream in(a / "trial_0_trace.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header.rfind("t,e,lambda,d,R,alpha_hat_1,", 0), 0u);
    EXPECT_NE(header.find(",K_10"), std::string::npos);
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    EXPECT_EQ(rows, 12u);
}

TEST(EmitResults, UnwritableDirectory) {
    const auto dir = scratch("ro");
    std::ofstream(dir / "file") << "x";
    EXPECT_THROW(emit_results({}, dir / "file" / "sub", json::object()), std::runtime_error);
}
