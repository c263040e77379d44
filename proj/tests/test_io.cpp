#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "netpanel/cli.hpp"
#include "netpanel/io.hpp"
#include "netpanel/synthetic.hpp"

using namespace netpanel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("netpanel_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string put(const fs::path& dir, const std::string& name, const std::string& text) {
    const auto p = (dir / name).string();
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("spec fixtures") {
    const auto flawed = flawed_spec();
    CHECK(flawed.terms.size() == 13);
    int contemporaneous = 0;
    for (const auto& t : flawed.terms) contemporaneous += t.binding == Binding::Contemporaneous;
    CHECK(contemporaneous == 3);
    CHECK(flawed.derived.size() == 2);

    const auto corrected = corrected_spec();
    CHECK(corrected.terms.size() == 13);
    for (const auto& t : corrected.terms) CHECK(t.binding != Binding::Contemporaneous);

    // the files shipped with the repository say the same thing
    for (const auto& [file, built_in] : {std::pair{"flawed_lc.json", flawed}, std::pair{"corrected.json", corrected}}) {
        const auto path = fs::path(NETPANEL_SOURCE_DIR) / "specs" / file;
        const auto loaded = load_model_spec(path.string());
        REQUIRE(loaded.terms.size() == built_in.terms.size());
        for (std::size_t k = 0; k < loaded.terms.size(); ++k) {
            CHECK(loaded.terms[k].label() == built_in.terms[k].label());
            CHECK(loaded.terms[k].binding == built_in.terms[k].binding);
            CHECK(loaded.terms[k].effective_decay() == built_in.terms[k].effective_decay());
        }
        REQUIRE(loaded.derived.size() == built_in.derived.size());
    }
}

TEST_CASE("parse_model_spec") {
    SUBCASE("bare array with defaults") {
        const auto s = parse_model_spec(R"([{"term":"edges"},{"term":"node_icov","attr":"x","coef":0.5},
                                            {"term":"gwesp_otp","decay":0.4}])");
        REQUIRE(s.terms.size() == 3);
        CHECK(s.terms[1].binding == Binding::Lagged);
        CHECK(s.terms[2].effective_decay() == 0.4);
        CHECK_FALSE(s.has_all_coefficients());
        CHECK(*s.coefficients[1] == 0.5);
    }
    SUBCASE("source wave is 1-based") {
        const auto s = parse_model_spec(R"([{"term":"node_icov","attr":"x","source_wave":2}])");
        CHECK(*s.terms[0].source_wave == 1);
        CHECK_THROWS_AS(parse_model_spec(R"([{"term":"node_icov","attr":"x","source_wave":0}])"), ValidationError);
    }
    SUBCASE("errors name the term") {
        const auto e = error_of([] { parse_model_spec(R"([{"term":"edges"},{"term":"edges","decay":0.5}])", "f.json"); });
        CHECK(e.find("f.json") != std::string::npos);
        CHECK(e.find("2") != std::string::npos);
        CHECK(e.find("decay") != std::string::npos);
    }
    SUBCASE("unknown term lists the valid kinds") {
        const auto e = error_of([] { parse_model_spec(R"([{"term":"triangles"}])"); });
        CHECK(e.find("triangles") != std::string::npos);
        CHECK(e.find("gwesp_otp") != std::string::npos);
        CHECK(e.find("memory_stability") != std::string::npos);
    }
    SUBCASE("other mistakes") {
        CHECK_THROWS_AS(parse_model_spec("not json"), ValidationError);
        CHECK_THROWS_AS(parse_model_spec("[]"), ValidationError);
        CHECK_THROWS_AS(parse_model_spec(R"([{"term":"edges","colour":1}])"), ValidationError);
        CHECK_THROWS_AS(parse_model_spec(R"([{"term":"node_icov"}])"), ValidationError);
        CHECK_THROWS_AS(parse_model_spec(R"([{"term":"edges","binding":"Sometimes"}])"), ValidationError);
    }
}

TEST_CASE("load_panel") {
    const auto dir = scratch("load");
    const auto w1 = put(dir, "w1.txt", "0 1 0\n0 0 1\n1 0 0\n");
    const auto w2 = put(dir, "w2.txt", "0,1,1\n0,0,1\n0,0,0\n");

    SUBCASE("whitespace and comma matrices") {
        const std::vector<std::string> waves{w1, w2};
        const auto cov = put(dir, "c.csv", "sex,score,g@1,g@2\nF,1.5,1,2\nM,2,1,3\nF,0,0,0\n");
        const std::vector<std::string> covs{cov, "near=" + w1};
        const Panel p = load_panel(waves, covs);
        CHECK(p.wave_count() == 2);
        CHECK(p.waves[1].tie(0, 2));
        CHECK(p.node_covariates.at("sex").kind == CovariateKind::Factor);
        CHECK(p.node_covariates.at("score").kind == CovariateKind::Numeric);
        CHECK(p.node_covariates.at("g").numeric.size() == 2);
        CHECK(p.node_covariates.at("g").numeric[1][1] == 3.0);
        CHECK(p.dyad_covariates.at("near")(1, 2) == 1.0);
    }
    SUBCASE("non-binary cell") {
        const auto bad = put(dir, "bad.txt", "0 1 0\n0 0 2\n1 0 0\n");
        const std::vector<std::string> waves{w1, bad};
        const auto e = error_of([&] { load_panel(waves, {}); });
        CHECK(e.find("bad.txt") != std::string::npos);
        CHECK(e.find("row 2") != std::string::npos);
    }
    SUBCASE("self loop") {
        const auto bad = put(dir, "loop.txt", "1 1 0\n0 0 1\n1 0 0\n");
        const std::vector<std::string> waves{w1, bad};
        CHECK(error_of([&] { load_panel(waves, {}); }).find("loop.txt") != std::string::npos);
    }
    SUBCASE("dimension mismatch") {
        const auto small = put(dir, "small.txt", "0 1\n1 0\n");
        const std::vector<std::string> waves{w1, small};
        const auto e = error_of([&] { load_panel(waves, {}); });
        CHECK(e.find("small.txt") != std::string::npos);
        CHECK(e.find("dimension") != std::string::npos);
    }
    SUBCASE("ragged rows") {
        const auto ragged = put(dir, "ragged.txt", "0 1 0\n0 0\n1 0 0\n");
        const std::vector<std::string> waves{w1, ragged};
        CHECK_THROWS_AS(load_panel(waves, {}), ValidationError);
    }
    SUBCASE("covariate rows must match nodes") {
        const auto cov = put(dir, "short.csv", "sex\nF\nM\n");
        const std::vector<std::string> waves{w1, w2};
        const std::vector<std::string> covs{cov};
        CHECK(error_of([&] { load_panel(waves, covs); }).find("short.csv") != std::string::npos);
    }
    SUBCASE("one wave is not a panel") {
        const std::vector<std::string> waves{w1};
        CHECK_THROWS_AS(load_panel(waves, {}), ValidationError);
    }
}

TEST_CASE("write_panel round trip") {
    ClassroomOptions o;
    o.n = 9;
    o.waves = 3;
    o.proposals_per_wave = 1000;
    o.warmup_waves = 0;
    const Panel p = simulate_classroom(o, 4).panel;
    const auto files = write_panel(p, scratch("roundtrip").string());
    const Panel q = load_panel(files.waves, files.covariates);
    CHECK(q.waves == p.waves);
    CHECK(q.node_covariates.at("sex").labels == p.node_covariates.at("sex").labels);
    CHECK(q.dyad_covariates.at("primary").values == p.dyad_covariates.at("primary").values);
}

TEST_CASE("format_double and hashing") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.0) == "-2");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("cli") {
    const auto dir = scratch("cli");
    ClassroomOptions o;
    o.n = 10;
    o.proposals_per_wave = 2000;
    o.warmup_waves = 1;
    const auto files = write_panel(simulate_classroom(o, 8).panel, (dir / "data").string());
    const auto flawed = (fs::path(NETPANEL_SOURCE_DIR) / "specs" / "flawed_lc.json").string();
    std::ostringstream log;

    SUBCASE("audit exit codes") {
        RunConfig c;
        c.subcommand = "audit";
        c.spec = flawed;
        c.out = (dir / "audit").string();
        c.nsim = 0;
        CHECK(run(c, log) == kExitLeakage);
        c.allow_leakage = true;
        CHECK(run(c, log) == kExitOk);
        c.spec = (fs::path(NETPANEL_SOURCE_DIR) / "specs" / "corrected.json").string();
        c.allow_leakage = false;
        CHECK(run(c, log) == kExitOk);
        const auto audit = slurp(dir / "audit" / "audit.json");
        CHECK(audit.find("\"config_hash\"") != std::string::npos);
    }
    SUBCASE("validation errors") {
        RunConfig c;
        c.subcommand = "estimate";
        c.spec = flawed;
        c.waves = files.waves;
        c.out = (dir / "est").string();
        CHECK(run(c, log) == kExitValidation);  // no seed
        c.subcommand = "frobnicate";
        c.seed = 1;
        CHECK(run(c, log) == kExitValidation);
    }
    SUBCASE("gof refuses leakage") {
        RunConfig c;
        c.subcommand = "gof";
        c.spec = flawed;
        c.waves = files.waves;
        c.covariates = files.covariates;
        c.seed = 3;
        c.out = (dir / "gof").string();
        CHECK(run(c, log) == kExitLeakage);
    }
    SUBCASE("simulate is byte-identical across runs") {
        const auto spec = put(dir, "fixed.json",
                              R"([{"term":"edges","coef":-1.5},{"term":"mutual","coef":1.0},
                                  {"term":"memory_stability","coef":1.5}])");
        RunConfig c;
        c.subcommand = "simulate";
        c.spec = spec;
        c.waves = files.waves;
        c.seed = 17;
        c.nsim = 20;
        c.burnin = 1000;
        c.thin = 50;
        c.out = (dir / "sim1").string();
        REQUIRE(run(c, log) == kExitOk);
        c.out = (dir / "sim2").string();
        REQUIRE(run(c, log) == kExitOk);
        for (const char* f : {"simulations.json", "tie_probabilities.csv"}) {
            const auto a = slurp(dir / "sim1" / f);
            CHECK_FALSE(a.empty());
            CHECK(a == slurp(dir / "sim2" / f));
        }
        CHECK(slurp(dir / "sim1" / "tie_probabilities.csv").rfind("# config_hash=", 0) == 0);
        c.seed = 18;
        c.out = (dir / "sim3").string();
        REQUIRE(run(c, log) == kExitOk);
        CHECK(slurp(dir / "sim1" / "simulations.json") != slurp(dir / "sim3" / "simulations.json"));
    }
    SUBCASE("config hash ignores the output directory") {
        RunConfig a;
        a.subcommand = "audit";
        a.out = "x";
        RunConfig b = a;
        b.out = "y";
        CHECK(canonical_config(a) == canonical_config(b));
        b.seed = 4;
        CHECK(canonical_config(a) != canonical_config(b));
    }
}
