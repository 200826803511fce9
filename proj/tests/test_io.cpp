#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kamwb/errors.hpp"
#include "kamwb/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace kamwb;

TEST_CASE("malformed json reports line and column")
{
    try {
        parse_config("{\n  \"a\": 1,\n  \"b\": [1, 2,, 3]\n}", "cfg.json");
        FAIL("no error");
    } catch (const ConfigError& e) {
        std::string w = e.what();
        CHECK(w.find("cfg.json:3:") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("config hash and header")
{
    auto a = parse_config(R"({"x": 1, "y": [1,2]})");
    auto b = parse_config(R"({ "y": [1, 2], "x": 1 })");
    auto c = parse_config(R"({"x": 2, "y": [1,2]})");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(c));
    CHECK(config_hash(a).size() == 16);
    auto h = output_header(a, 42);
    CHECK(h.find("# seed 42\n") != std::string::npos);
    CHECK(h.find("# config " + config_hash(a)) != std::string::npos);
}

TEST_CASE("csv writer and atomic write")
{
    json cfg = json::object();
    CsvWriter w(cfg, 7, {"a", "b"});
    w.row({0.1, 1e-300});
    CHECK(w.str().find("a,b\n0.1,1e-300\n") != std::string::npos);
    CHECK_THROWS_AS(w.row({1.0}), ConfigError);
    CHECK(fmt(0.1 + 0.2) == "0.30000000000000004");

    auto dir = std::filesystem::temp_directory_path() / "kamwb_io_test";
    std::filesystem::remove_all(dir);
    auto path = (dir / "sub" / "out.csv").string();
    w.save(path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == w.str());
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("section parsers")
{
    auto j = parse_config(R"({
      "window": [0, 1], "omega": [1.0, 1.4142135623730951], "subsets": [[0], [1], [0, 1]],
      "delta": {"kind": "power-exp", "sigma": 0.3333333333333333},
      "schedule": {"mu_total": 0.5, "rho_total": 0.2, "decay_q": 0.75, "r": 0.5},
      "caps": {"order_cap": 5},
      "box": [[1, 2]],
      "oscillator": {"l": 1, "epsilon": 1e-25,
                     "p": [[{"k": {"1": 1}, "a": 1.0}], [], [{"k": {"0": 1, "1": 1}, "a": 0.25}]]},
      "simulate": {"method": "rk78", "dt": 0.05}
    })");
    auto S = structure_from_json(j);
    CHECK(S.size() == 3);
    auto f = frequency_from_json(j);
    CHECK(f.at(1) == doctest::Approx(1.41421356));
    CHECK(delta_from_json(j).name() == ApproxFunction::power_exp(1.0 / 3).name());
    auto k = schedule_from_json(j);
    CHECK(k.r == 0.5);
    CHECK(k.seq.decay_q == 0.75);
    CHECK(caps_from_json(j).order_cap == 5);
    CHECK(box_from_json(j).bounds.at(0).second == 2.0);
    auto spec = forcing_from_json(j);
    CHECK(spec.epsilon == 1e-25);
    CHECK(spec.p.size() == 3);
    CHECK(spec.p[2].terms.at(0).k.at(0) == 1);
    CHECK(sim_options_from_json(j).method == Integrator::RK78);
    CHECK(hamiltonian_options_from_json(j).r == 0.5);

    auto bad = j;
    bad["schedule"]["rho_total"] = 0.3;
    CHECK_THROWS_AS(schedule_from_json(bad), ConfigError);
    bad = j;
    bad["oscillator"]["epsilon"] = -1.0;
    CHECK_THROWS_AS(forcing_from_json(bad), ConfigError);
    bad = j;
    bad["simulate"]["method"] = "euler";
    CHECK_THROWS_AS(sim_options_from_json(bad), ConfigError);
    bad = j;
    bad["oscillator"]["p"][0][0]["k"] = {{"x", 1}};
    CHECK_THROWS_AS(forcing_from_json(bad), ConfigError);
}
