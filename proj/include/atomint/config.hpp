#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "atomint/interferometer.hpp"
#include "atomint/noise.hpp"

namespace atomint {

using Json = nlohmann::ordered_json;

/// Settings of the time-resolved fringe run.
struct FringeRunSettings
{
    double bin_s = 0.1;
    double duration_s = 40.0;
    double piezo_rate_m_s = 84e-9;           // about one fringe per 4 s
    double piezo_quadratic_m_s2 = 0.2e-9;    // hysteresis
    int scan_points = 201;                   // x_M3 scan samples
    double scan_periods = 3.0;               // x_M3 scan length in grating periods
    double background_block_s = 0.0;         // beam-flagged segment; > 0 fits the background
};

/// Settings of the single-grating diffraction scan.
struct DiffractionRunSettings
{
    double slit_from_m = -150e-6;
    double slit_to_m = 350e-6;
    double slit_step_m = 2.5e-6;
    double slit_width_m = 50e-6;
    int grating = 2;  // 1-based index of the active standing wave
    double bin_s = 1.0;
};

struct RunConfig
{
    InterferometerConfig interferometer;
    DetectorModel detector;
    VibrationModel vibration;
    FringeRunSettings fringes;
    DiffractionRunSettings diffraction;
    std::uint64_t seed = 1;
    std::size_t samples = 20000;
    unsigned threads = 1;
    std::string output_dir = "out";

    void validate() const;
};

/// Defaults, including a 0.63 rad phase dispersion.
RunConfig default_run_config();

Json to_json(const RunConfig& cfg);
/// Overlays `j` on the defaults; unknown keys and invalid values throw ConfigError.
RunConfig from_json(const Json& j);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);
std::string dump_config(const RunConfig& cfg);

/// Numeric (or 0/1 boolean) config entry addressed by a JSON pointer such as
/// "/standing_waves/1/power_mw" (the leading slash is optional).
double get_parameter(const RunConfig& cfg, std::string_view path);
RunConfig with_parameter(const RunConfig& cfg, std::string_view path, double value);

}  // namespace atomint
