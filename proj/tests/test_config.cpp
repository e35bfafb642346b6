#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "atomint/config.hpp"
#include "atomint/errors.hpp"

using namespace atomint;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name)
{
    auto const dir = fs::temp_directory_path() / "atomint_test_config";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("round trip")
{
    auto cfg = default_run_config();
    cfg.seed = 42;
    cfg.samples = 1234;
    cfg.interferometer.waves[1].power_w = 0.075;
    cfg.interferometer.include_strays = false;
    cfg.interferometer.model = BraggModel::ladder;
    cfg.detector.efficiency = 0.3;
    cfg.fringes.scan_points = 77;
    cfg.output_dir = "elsewhere";

    auto const j = to_json(cfg);
    auto const back = from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.seed == 42);
    CHECK(back.samples == 1234);
    CHECK(back.interferometer.waves[1].power_w == doctest::Approx(0.075));
    CHECK_FALSE(back.interferometer.include_strays);
    CHECK(back.interferometer.model == BraggModel::ladder);
    CHECK(back.detector.efficiency == 0.3);
    CHECK(back.fringes.scan_points == 77);
    CHECK(back.output_dir == "elsewhere");
    CHECK(dump_config(back) == dump_config(cfg));

    auto const path = temp_file("round_trip.json");
    save_config(path, cfg);
    CHECK(to_json(load_config(path)) == j);
}

TEST_CASE("partial documents overlay the defaults")
{
    auto const j = Json::parse(R"({"seed": 7, "detector": {"efficiency": 0.25},
                                   "standing_waves": [{}, {"power_mw": 60}, {}]})");
    auto const cfg = from_json(j);
    auto const def = default_run_config();
    CHECK(cfg.seed == 7);
    CHECK(cfg.detector.efficiency == 0.25);
    CHECK(cfg.detector.background_hz == def.detector.background_hz);
    CHECK(cfg.interferometer.waves[1].power_w == doctest::Approx(0.060));
    CHECK(cfg.interferometer.waves[0].power_w == def.interferometer.waves[0].power_w);
    CHECK(cfg.interferometer.phase_dispersion_rad == doctest::Approx(0.63));
    CHECK(to_json(from_json(Json::object())) == to_json(def));
}

TEST_CASE("invalid documents")
{
    CHECK_THROWS_AS(from_json(Json::parse(R"({"sede": 3})")), ConfigError);
    CHECK_THROWS_AS(from_json(Json::parse(R"({"detector": {"eficiency": 0.3}})")), ConfigError);
    try {
        from_json(Json::parse(R"({"beam": {"speed": 1}})"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("/beam/speed") != std::string::npos);
    }
    CHECK_THROWS_AS(from_json(Json::parse(R"({"seed": "one"})")), ConfigError);
    CHECK_THROWS_AS(from_json(Json::parse(R"({"detector": {"efficiency": 1.5}})")), ConfigError);
    CHECK_THROWS_AS(from_json(Json::parse(R"({"model": "exact"})")), ConfigError);
    CHECK_THROWS_AS(from_json(Json::parse(R"({"standing_waves": [{}, {}]})")), ConfigError);
    CHECK_THROWS_AS(from_json(Json::parse(R"([1, 2])")), ConfigError);
    CHECK_THROWS_AS(from_json(Json::parse(R"({"beam": {"speed_ratio": 0.5}})")), ConfigError);

    CHECK_THROWS_AS(load_config(temp_file("missing.json")), ConfigError);
    auto const bad = temp_file("bad.json");
    std::ofstream(bad) << "{ not json";
    CHECK_THROWS_AS(load_config(bad), ConfigError);
}

TEST_CASE("parameter access by path")
{
    auto const cfg = default_run_config();
    CHECK(get_parameter(cfg, "/standing_waves/1/power_mw") == doctest::Approx(80.0));
    CHECK(get_parameter(cfg, "standing_waves/1/power_mw") == doctest::Approx(80.0));
    CHECK(get_parameter(cfg, "/interferometer/include_strays") == 1.0);
    CHECK(get_parameter(cfg, "/seed") == 1.0);

    auto const c2 = with_parameter(cfg, "/standing_waves/0/theta_z_urad", 12.5);
    CHECK(c2.interferometer.waves[0].theta_z_rad == doctest::Approx(12.5e-6));
    CHECK(get_parameter(c2, "/standing_waves/0/theta_z_urad") == doctest::Approx(12.5));
    CHECK(cfg.interferometer.waves[0].theta_z_rad == 0.0);

    auto const c3 = with_parameter(cfg, "/interferometer/include_strays", 0);
    CHECK_FALSE(c3.interferometer.include_strays);
    auto const c4 = with_parameter(cfg, "/samples", 500);
    CHECK(c4.samples == 500);

    CHECK_THROWS_AS(with_parameter(cfg, "/samples", 2.5), ConfigError);
    CHECK_THROWS_AS(get_parameter(cfg, "/standing_waves/7/power_mw"), ConfigError);
    CHECK_THROWS_AS(get_parameter(cfg, "/nothing"), ConfigError);
    CHECK_THROWS_AS(get_parameter(cfg, "/output_dir"), ConfigError);
    CHECK_THROWS_AS(with_parameter(cfg, "/detector/efficiency", 2.0), ConfigError);
}
