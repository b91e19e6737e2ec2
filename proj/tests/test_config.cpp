#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "idpo/config.hpp"

using namespace idpo;

namespace {

std::string write_temp(const char* name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << body;
    return path.string();
}

} // namespace

TEST_CASE("config parses key=value lines with comments and sections") {
    const std::string path = write_temp("idpo_cfg_ok.cfg",
                                        "# experiment\n"
                                        "seed = 42\n"
                                        "schedule.T=80   # steps\n"
                                        "schedule.alpha_T = 0.01\n"
                                        "\n"
                                        "dpo.variant = inversion-dpo\n");
    const Config cfg = Config::from_file(path);
    REQUIRE(cfg.get_u64("seed", 0) == 42);
    REQUIRE(cfg.get_int("schedule.T", 0) == 80);
    REQUIRE(cfg.get_double("schedule.alpha_T", 0.0) == 0.01);
    REQUIRE(cfg.get_string("dpo.variant", "") == "inversion-dpo");
    REQUIRE(cfg.get_int("missing.key", 7) == 7);
}

TEST_CASE("config reports the offending line number") {
    const std::string path = write_temp("idpo_cfg_bad.cfg",
                                        "seed = 1\n"
                                        "this line has no equals\n");
    try {
        Config::from_file(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(e.line == 2);
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("config rejects unparseable numbers") {
    const std::string path = write_temp("idpo_cfg_num.cfg", "schedule.T = eighty\n");
    const Config cfg = Config::from_file(path);
    REQUIRE_THROWS_AS(cfg.get_int("schedule.T", 0), ConfigError);
}

TEST_CASE("missing file is a config error") {
    REQUIRE_THROWS_AS(Config::from_file("/nonexistent/idpo.cfg"), ConfigError);
}

TEST_CASE("overrides replace file values") {
    const std::string path = write_temp("idpo_cfg_ovr.cfg", "seed = 1\nschedule.T = 80\n");
    Config cfg = Config::from_file(path);
    cfg.apply_override("schedule.T=40");
    REQUIRE(cfg.get_int("schedule.T", 0) == 40);
    REQUIRE_THROWS_AS(cfg.apply_override("notanassignment"), ConfigError);
    REQUIRE_THROWS_AS(cfg.apply_override("=5"), ConfigError);
}
