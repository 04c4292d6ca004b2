#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <json.hpp>

#include "sfl/config.hpp"
#include "sfl/report.hpp"

using namespace sfl;
using Catch::Matchers::WithinAbs;

TEST_CASE("csv fields quote exactly when needed", "[reporting]") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("3.5e-2") == "3.5e-2");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_field("two\nlines") == "\"two\nlines\"");
    CHECK(csv_field("") == "");

    CsvTable t({"a", "b"});
    t.add_row({"1", "x,y"});
    CHECK(t.text() == "a,b\n1,\"x,y\"\n");
    CHECK_THROWS_AS(t.add_row({"only-one"}), ConfigError);
    CHECK_THROWS_AS(CsvTable(std::vector<std::string>{}), ConfigError);
}

TEST_CASE("criterion helpers decide pass flags", "[reporting]") {
    CHECK(criterion_rel("x", 1.04, 1.0, 0.05).pass);
    CHECK_FALSE(criterion_rel("x", 1.06, 1.0, 0.05).pass);
    CHECK_FALSE(criterion_rel("x", std::nan(""), 1.0, 0.05).pass);
    CHECK(criterion_max("x", 0.99, 1.0).pass);
    CHECK_FALSE(criterion_max("x", 1.01, 1.0).pass);
    CHECK(criterion_flag("x", true).pass);
    CHECK_FALSE(criterion_flag("x", false).pass);

    RunReport r;
    CHECK_FALSE(r.all_pass());  // empty list proves nothing
    r.criteria.push_back(criterion_flag("a", true));
    CHECK(r.all_pass());
    r.criteria.push_back(criterion_flag("b", false));
    CHECK_FALSE(r.all_pass());
}

TEST_CASE("report serializations match the golden bytes", "[reporting]") {
    RunReport r;
    r.experiment = "split";
    r.system = "two-level-roof";
    r.seed = 7;
    r.workers = 2;
    r.config_hash = "00ff00ff00ff00ff";
    r.criteria.push_back(criterion_rel("central-window", 0.25, 0.26419, 0.1));
    r.criteria.push_back(criterion_max("held-out-ratio", 0.9731, 1.000000001));
    r.criteria.push_back(criterion_flag("fit-converged", true));
    r.criteria.push_back(
        criterion_rel("needs, quoting \"here\"", 1.5, 1.0, 0.1));

    std::string dir = SFL_GOLDEN_DIR;
    CHECK(criteria_csv(r) == read_text_file(dir + "/report.csv"));
    CHECK(report_json(r) == read_text_file(dir + "/report.json"));
}

TEST_CASE("report json parses back with the same fields", "[reporting]") {
    RunReport r;
    r.experiment = "rwm";
    r.system = "zcover-doubling-digit";
    r.seed = 42;
    r.config_hash = "deadbeefdeadbeef";
    r.criteria.push_back(criterion_max("cesaro \"D\"\n", 0.042, 0.15));
    nlohmann::json j = nlohmann::json::parse(report_json(r));
    CHECK(j["experiment"] == "rwm");
    CHECK(j["seed"] == 42);
    CHECK(j["criteria"].size() == 1);
    CHECK(j["criteria"][0]["name"] == "cesaro \"D\"\n");
    CHECK_THAT(j["criteria"][0]["value"].get<double>(),
               WithinAbs(0.042, 1e-15));
    CHECK(j["criteria"][0]["pass"] == true);
    CHECK(j["all_pass"] == true);

    // non-finite values must not produce invalid tokens
    RunReport bad;
    bad.experiment = "x";
    bad.criteria.push_back(criterion_rel("inf", 1.0 / 0.0, 1.0, 0.1));
    nlohmann::json jb = nlohmann::json::parse(report_json(bad));
    CHECK(jb["criteria"][0]["value"].is_null());
    CHECK(jb["criteria"][0]["pass"] == false);
}

TEST_CASE("text files round trip through the writer", "[reporting]") {
    std::string path = "build_roundtrip_probe.txt";
    write_text_file(path, "line1\n\"x\",2\n");
    CHECK(read_text_file(path) == "line1\n\"x\",2\n");
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_text_file("no/such/dir/file.txt"), ConfigError);
}

TEST_CASE("experiment kinds round trip by name", "[reporting]") {
    for (const auto& [name, kind] : kind_table()) {
        CHECK(parse_kind(name) == kind);
        CHECK(kind_name(kind) == name);
    }
    CHECK(kind_table().size() == 10);
    CHECK_THROWS_AS(parse_kind("frobnicate"), ConfigError);
}

TEST_CASE("grids parse from lists and ranges", "[reporting]") {
    std::vector<double> list = parse_grid("25,100,400");
    REQUIRE(list.size() == 3);
    CHECK(list[0] == 25.0);
    CHECK(list[2] == 400.0);

    std::vector<double> range = parse_grid("0:1:0.05");
    REQUIRE(range.size() == 21);
    CHECK(range.front() == 0.0);
    CHECK_THAT(range.back(), WithinAbs(1.0, 1e-12));

    std::vector<size_t> idx = parse_index_grid("16,64,256");
    REQUIRE(idx.size() == 3);
    CHECK(idx[2] == 256);

    CHECK_THROWS_AS(parse_grid(""), ConfigError);
    CHECK_THROWS_AS(parse_grid("1,,2"), ConfigError);
    CHECK_THROWS_AS(parse_grid("1:2"), ConfigError);
    CHECK_THROWS_AS(parse_grid("2:1:0.5"), ConfigError);
    CHECK_THROWS_AS(parse_grid("0:1:0"), ConfigError);
    CHECK_THROWS_AS(parse_index_grid("2.5"), ConfigError);
    CHECK_THROWS_AS(parse_index_grid("-3"), ConfigError);
}

TEST_CASE("config hash is frozen over the canonical text", "[reporting]") {
    RunConfig c;
    c.kind = ExperimentKind::split;
    c.system = "two-level-roof";
    c.t_grid = "50,80";
    c.m_grid = "0,1,2,3,4";
    c.workers = 2;
    c.seed = 7;
    CHECK(config_hash(c) == "99ad33b6aa07afd3");
    RunConfig d = c;
    d.seed = 8;
    CHECK(config_hash(d) == "99a311b6a9ff2188");
    CHECK(config_hash(c) != config_hash(d));
}

TEST_CASE("config validation names the failing field", "[reporting]") {
    RunConfig c;
    c.kind = ExperimentKind::eig;
    c.system = "doubling-pm-half";
    c.t_grid = "0:1:0.05";

    CHECK_THROWS_WITH(validate_config(c),
                      Catch::Matchers::ContainsSubstring("seed"));
    c.seed = 1;
    CHECK_NOTHROW(validate_config(c));

    c.system.clear();
    CHECK_THROWS_WITH(validate_config(c),
                      Catch::Matchers::ContainsSubstring("system"));
    c.system = "doubling-pm-half";
    c.t_grid.clear();
    CHECK_THROWS_WITH(validate_config(c),
                      Catch::Matchers::ContainsSubstring("t"));

    RunConfig w;
    w.kind = ExperimentKind::ctrw;
    w.t_grid = "25";
    w.seed = 3;
    w.workers = 0;
    CHECK_THROWS_WITH(validate_config(w),
                      Catch::Matchers::ContainsSubstring("workers"));
    w.workers = 1;
    CHECK_NOTHROW(validate_config(w));  // ctrw runs without a system
}
