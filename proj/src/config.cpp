#include "atomint/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "atomint/constants.hpp"
#include "atomint/errors.hpp"

namespace atomint {

namespace c = constants;

namespace {

constexpr double um = 1e-6;
constexpr double nm = 1e-9;
constexpr double mm = 1e-3;
constexpr double urad = 1e-6;
constexpr double mw = 1e-3;
constexpr double mhz_ang = 2.0 * c::pi * 1e6;
constexpr double ghz_ang = 2.0 * c::pi * 1e9;

// Reads one JSON object, recording which keys were consumed.
class Section
{
  public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(fmt::format("{}: expected an object", where()));
    }

    void number(const char* key, double& out, double unit = 1.0)
    {
        if (auto const* v = find(key)) {
            if (!v->is_number())
                throw ConfigError(fmt::format("{}/{}: expected a number", path_, key));
            out = v->get<double>() * unit;
        }
    }

    template<class Int>
    void integer(const char* key, Int& out)
    {
        if (auto const* v = find(key)) {
            if (!v->is_number_integer())
                throw ConfigError(fmt::format("{}/{}: expected an integer", path_, key));
            if constexpr (std::is_unsigned_v<Int>) {
                if (v->get<std::int64_t>() < 0)
                    throw ConfigError(fmt::format("{}/{}: must be non-negative", path_, key));
            }
            out = v->get<Int>();
        }
    }

    void boolean(const char* key, bool& out)
    {
        if (auto const* v = find(key)) {
            if (!v->is_boolean())
                throw ConfigError(fmt::format("{}/{}: expected true or false", path_, key));
            out = v->get<bool>();
        }
    }

    void string(const char* key, std::string& out)
    {
        if (auto const* v = find(key)) {
            if (!v->is_string())
                throw ConfigError(fmt::format("{}/{}: expected a string", path_, key));
            out = v->get<std::string>();
        }
    }

    const Json* find(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const Json* array(const char* key)
    {
        auto const* v = find(key);
        if (v && !v->is_array())
            throw ConfigError(fmt::format("{}/{}: expected an array", path_, key));
        return v;
    }

    std::string child(const char* key) const { return path_ + "/" + key; }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(fmt::format("unknown configuration key '{}/{}'", path_, it.key()));
    }

  private:
    std::string where() const { return path_.empty() ? "<root>" : path_; }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Json level_json(const HyperfineLevel& l)
{
    return Json{{"f", l.f}, {"degeneracy", l.degeneracy},
                {"detuning_ghz", l.detuning_rad_s / ghz_ang}};
}

void read_level(const Json& j, const std::string& path, HyperfineLevel& l)
{
    Section s(j, path);
    s.integer("f", l.f);
    s.integer("degeneracy", l.degeneracy);
    s.number("detuning_ghz", l.detuning_rad_s, ghz_ang);
    s.finish();
}

Json species_json(const Species& sp)
{
    Json levels = Json::array();
    for (auto const& l : sp.levels)
        levels.push_back(level_json(l));
    return Json{{"name", sp.name},
                {"mass_u", sp.mass_kg / c::atomic_mass_unit},
                {"abundance", sp.abundance},
                {"resonance_wavelength_nm", sp.resonance_wavelength_m / nm},
                {"linewidth_mhz", sp.linewidth_rad_s / mhz_ang},
                {"saturation_intensity_w_m2", sp.saturation_intensity_w_m2},
                {"diffracted", sp.diffracted},
                {"levels", levels}};
}

void read_species(const Json& j, const std::string& path, Species& sp)
{
    Section s(j, path);
    s.string("name", sp.name);
    s.number("mass_u", sp.mass_kg, c::atomic_mass_unit);
    s.number("abundance", sp.abundance);
    s.number("resonance_wavelength_nm", sp.resonance_wavelength_m, nm);
    s.number("linewidth_mhz", sp.linewidth_rad_s, mhz_ang);
    s.number("saturation_intensity_w_m2", sp.saturation_intensity_w_m2);
    s.boolean("diffracted", sp.diffracted);
    if (auto const* levels = s.array("levels")) {
        std::vector<HyperfineLevel> out(levels->size());
        for (std::size_t i = 0; i < levels->size(); ++i) {
            if (i < sp.levels.size())
                out[i] = sp.levels[i];
            read_level((*levels)[i], fmt::format("{}/{}", s.child("levels"), i), out[i]);
        }
        sp.levels = std::move(out);
    }
    s.finish();
}

Json wave_json(const StandingWave& w, bool active)
{
    return Json{{"active", active},
                {"mirror_x_nm", w.mirror_x_m / nm},
                {"theta_y_urad", w.theta_y_rad / urad},
                {"theta_z_urad", w.theta_z_rad / urad},
                {"power_mw", w.power_w / mw},
                {"waist_mm", w.waist_m / mm},
                {"grating_period_nm", w.period() / nm},
                {"coupling_scale", w.coupling_scale},
                {"loss_probability", w.loss_probability}};
}

void read_wave(const Json& j, const std::string& path, StandingWave& w, bool& active)
{
    Section s(j, path);
    s.boolean("active", active);
    s.number("mirror_x_nm", w.mirror_x_m, nm);
    s.number("theta_y_urad", w.theta_y_rad, urad);
    s.number("theta_z_urad", w.theta_z_rad, urad);
    s.number("power_mw", w.power_w, mw);
    s.number("waist_mm", w.waist_m, mm);
    double period = w.period();
    s.number("grating_period_nm", period, nm);
    if (!(period > 0))
        throw ConfigError(fmt::format("{}/grating_period_nm: must be positive", path));
    w.grating_k_rad_m = c::two_pi / period;
    s.number("coupling_scale", w.coupling_scale);
    s.number("loss_probability", w.loss_probability);
    s.finish();
}

}  // namespace

void RunConfig::validate() const
{
    interferometer.validate();
    detector.validate();
    vibration.validate();
    auto const& f = fringes;
    if (!(f.bin_s > 0) || !(f.duration_s >= 6 * f.bin_s))
        throw ConfigError("fringes: need bin_s > 0 and at least six bins");
    if (f.scan_points < 2 || !(f.scan_periods > 0))
        throw ConfigError("fringes: scan needs at least two points over a positive range");
    if (!(f.background_block_s >= 0))
        throw ConfigError("fringes: background block duration must be non-negative");
    auto const& d = diffraction;
    if (!(d.slit_step_m > 0) || !(d.slit_to_m > d.slit_from_m))
        throw ConfigError("diffraction: slit sweep needs a positive step and increasing range");
    if (!(d.slit_width_m > 0) || !(d.bin_s > 0))
        throw ConfigError("diffraction: slit width and bin must be positive");
    if (d.grating < 1 || d.grating > 3)
        throw ConfigError("diffraction: grating must be 1, 2 or 3");
    if (samples == 0)
        throw ConfigError("samples must be positive");
    if (threads == 0)
        throw ConfigError("threads must be at least 1");
}

RunConfig default_run_config()
{
    RunConfig cfg;
    cfg.interferometer = default_interferometer();
    cfg.interferometer.phase_dispersion_rad = 0.63;
    return cfg;
}

Json to_json(const RunConfig& cfg)
{
    auto const& ic = cfg.interferometer;
    Json species = Json::array();
    for (auto const& sp : ic.species)
        species.push_back(species_json(sp));
    Json waves = Json::array();
    for (std::size_t j = 0; j < 3; ++j)
        waves.push_back(wave_json(ic.waves[j], ic.active[j]));
    auto const& g = ic.geometry;
    Json j;
    j["model"] = to_string(ic.model);
    j["seed"] = cfg.seed;
    j["samples"] = cfg.samples;
    j["threads"] = cfg.threads;
    j["output_dir"] = cfg.output_dir;
    j["species"] = species;
    j["beam"] = Json{{"mean_speed_m_s", ic.source.mean_speed_m_s},
                     {"speed_ratio", ic.source.speed_ratio},
                     {"temperature_k", ic.source.temperature_k},
                     {"carrier_mass_u", ic.source.carrier_mass_kg / c::atomic_mass_unit},
                     {"flux_hz", ic.source.flux_hz}};
    j["geometry"] = Json{{"slit0_z_m", g.slit0_z_m},
                         {"slit0_width_um", g.slit0_width_m / um},
                         {"slit1_z_m", g.slit1_z_m},
                         {"slit1_width_um", g.slit1_width_m / um},
                         {"mirror_z_m", g.mirror_z_m},
                         {"detector_slit_z_m", g.detector_slit_z_m},
                         {"detector_z_m", g.detector_z_m},
                         {"detector_slit_width_um", g.detector_slit_width_m / um},
                         {"ribbon_width_um", g.ribbon_width_m / um},
                         {"aperture_height_mm", g.aperture_height_m / mm}};
    j["standing_waves"] = waves;
    j["interferometer"] = Json{{"detector_port", ic.detector_port},
                               {"detector_slit_offset_um", ic.detector_slit_offset_m / um},
                               {"ladder_p_max", ic.ladder_p_max},
                               {"orders", ic.orders},
                               {"include_strays", ic.include_strays},
                               {"phase_dispersion_rad", ic.phase_dispersion_rad},
                               {"coherence_width_um", ic.coherence_width_m / um},
                               {"spacing_tolerance_mm", ic.spacing_tolerance_m / mm}};
    j["detector"] = Json{{"efficiency", cfg.detector.efficiency},
                         {"background_hz", cfg.detector.background_hz},
                         {"burst_rate_hz", cfg.detector.burst_rate_hz},
                         {"burst_counts", cfg.detector.burst_counts}};
    j["vibration"] = Json{{"rms_nm", cfg.vibration.rms_m / nm},
                          {"bandwidth_hz", cfg.vibration.bandwidth_hz}};
    auto const& f = cfg.fringes;
    j["fringes"] = Json{{"bin_s", f.bin_s},
                        {"duration_s", f.duration_s},
                        {"piezo_rate_nm_s", f.piezo_rate_m_s / nm},
                        {"piezo_quadratic_nm_s2", f.piezo_quadratic_m_s2 / nm},
                        {"scan_points", f.scan_points},
                        {"scan_periods", f.scan_periods},
                        {"background_block_s", f.background_block_s}};
    auto const& d = cfg.diffraction;
    j["diffraction"] = Json{{"slit_from_um", d.slit_from_m / um},
                            {"slit_to_um", d.slit_to_m / um},
                            {"slit_step_um", d.slit_step_m / um},
                            {"slit_width_um", d.slit_width_m / um},
                            {"grating", d.grating},
                            {"bin_s", d.bin_s}};
    return j;
}

RunConfig from_json(const Json& j)
{
    RunConfig cfg = default_run_config();
    auto& ic = cfg.interferometer;
    Section root(j, "");

    std::string model = to_string(ic.model);
    root.string("model", model);
    ic.model = parse_bragg_model(model);
    root.integer("seed", cfg.seed);
    root.integer("samples", cfg.samples);
    root.integer("threads", cfg.threads);
    root.string("output_dir", cfg.output_dir);

    if (auto const* species = root.array("species")) {
        std::vector<Species> out(species->size());
        for (std::size_t i = 0; i < species->size(); ++i) {
            if (i < ic.species.size())
                out[i] = ic.species[i];
            read_species((*species)[i], fmt::format("/species/{}", i), out[i]);
        }
        ic.species = std::move(out);
    }
    if (auto const* beam = root.find("beam")) {
        Section s(*beam, "/beam");
        s.number("mean_speed_m_s", ic.source.mean_speed_m_s);
        s.number("speed_ratio", ic.source.speed_ratio);
        s.number("temperature_k", ic.source.temperature_k);
        s.number("carrier_mass_u", ic.source.carrier_mass_kg, c::atomic_mass_unit);
        s.number("flux_hz", ic.source.flux_hz);
        s.finish();
    }
    if (auto const* geom = root.find("geometry")) {
        auto& g = ic.geometry;
        Section s(*geom, "/geometry");
        s.number("slit0_z_m", g.slit0_z_m);
        s.number("slit0_width_um", g.slit0_width_m, um);
        s.number("slit1_z_m", g.slit1_z_m);
        s.number("slit1_width_um", g.slit1_width_m, um);
        if (auto const* z = s.array("mirror_z_m")) {
            if (z->size() != 3)
                throw ConfigError("/geometry/mirror_z_m: expected three positions");
            for (std::size_t i = 0; i < 3; ++i) {
                if (!(*z)[i].is_number())
                    throw ConfigError("/geometry/mirror_z_m: expected numbers");
                g.mirror_z_m[i] = (*z)[i].get<double>();
            }
        }
        s.number("detector_slit_z_m", g.detector_slit_z_m);
        s.number("detector_z_m", g.detector_z_m);
        s.number("detector_slit_width_um", g.detector_slit_width_m, um);
        s.number("ribbon_width_um", g.ribbon_width_m, um);
        s.number("aperture_height_mm", g.aperture_height_m, mm);
        s.finish();
    }
    if (auto const* waves = root.array("standing_waves")) {
        if (waves->size() != 3)
            throw ConfigError("/standing_waves: expected three standing waves");
        for (std::size_t i = 0; i < 3; ++i) {
            bool active = ic.active[i];
            read_wave((*waves)[i], fmt::format("/standing_waves/{}", i), ic.waves[i], active);
            ic.active[i] = active;
        }
    }
    if (auto const* itf = root.find("interferometer")) {
        Section s(*itf, "/interferometer");
        s.integer("detector_port", ic.detector_port);
        s.number("detector_slit_offset_um", ic.detector_slit_offset_m, um);
        s.integer("ladder_p_max", ic.ladder_p_max);
        if (auto const* orders = s.array("orders")) {
            std::vector<int> out;
            for (auto const& o : *orders) {
                if (!o.is_number_integer())
                    throw ConfigError("/interferometer/orders: expected integers");
                out.push_back(o.get<int>());
            }
            ic.orders = std::move(out);
        }
        s.boolean("include_strays", ic.include_strays);
        s.number("phase_dispersion_rad", ic.phase_dispersion_rad);
        s.number("coherence_width_um", ic.coherence_width_m, um);
        s.number("spacing_tolerance_mm", ic.spacing_tolerance_m, mm);
        s.finish();
    }
    if (auto const* det = root.find("detector")) {
        Section s(*det, "/detector");
        s.number("efficiency", cfg.detector.efficiency);
        s.number("background_hz", cfg.detector.background_hz);
        s.number("burst_rate_hz", cfg.detector.burst_rate_hz);
        s.number("burst_counts", cfg.detector.burst_counts);
        s.finish();
    }
    if (auto const* vib = root.find("vibration")) {
        Section s(*vib, "/vibration");
        s.number("rms_nm", cfg.vibration.rms_m, nm);
        s.number("bandwidth_hz", cfg.vibration.bandwidth_hz);
        s.finish();
    }
    if (auto const* fr = root.find("fringes")) {
        auto& f = cfg.fringes;
        Section s(*fr, "/fringes");
        s.number("bin_s", f.bin_s);
        s.number("duration_s", f.duration_s);
        s.number("piezo_rate_nm_s", f.piezo_rate_m_s, nm);
        s.number("piezo_quadratic_nm_s2", f.piezo_quadratic_m_s2, nm);
        s.integer("scan_points", f.scan_points);
        s.number("scan_periods", f.scan_periods);
        s.number("background_block_s", f.background_block_s);
        s.finish();
    }
    if (auto const* df = root.find("diffraction")) {
        auto& d = cfg.diffraction;
        Section s(*df, "/diffraction");
        s.number("slit_from_um", d.slit_from_m, um);
        s.number("slit_to_um", d.slit_to_m, um);
        s.number("slit_step_um", d.slit_step_m, um);
        s.number("slit_width_um", d.slit_width_m, um);
        s.integer("grating", d.grating);
        s.number("bin_s", d.bin_s);
        s.finish();
    }
    root.finish();
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open configuration file '{}'", path.string()));
    Json j;
    try {
        j = Json::parse(in);
    } catch (Json::parse_error const& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return from_json(j);
}

std::string dump_config(const RunConfig& cfg)
{
    return to_json(cfg).dump(2) + "\n";
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out << dump_config(cfg);
}

namespace {

Json::json_pointer pointer(std::string_view path)
{
    std::string p(path);
    if (p.empty() || p.front() != '/')
        p.insert(p.begin(), '/');
    try {
        return Json::json_pointer(p);
    } catch (Json::exception const&) {
        throw ConfigError(fmt::format("malformed parameter path '{}'", path));
    }
}

}  // namespace

double get_parameter(const RunConfig& cfg, std::string_view path)
{
    Json const j = to_json(cfg);
    auto const ptr = pointer(path);
    if (!j.contains(ptr) || !(j.at(ptr).is_number() || j.at(ptr).is_boolean()))
        throw ConfigError(fmt::format("unknown numeric parameter '{}'", path));
    if (j.at(ptr).is_boolean())
        return j.at(ptr).get<bool>() ? 1.0 : 0.0;
    return j.at(ptr).get<double>();
}

RunConfig with_parameter(const RunConfig& cfg, std::string_view path, double value)
{
    Json j = to_json(cfg);
    auto const ptr = pointer(path);
    if (!j.contains(ptr) || !(j.at(ptr).is_number() || j.at(ptr).is_boolean()))
        throw ConfigError(fmt::format("unknown numeric parameter '{}'", path));
    if (j.at(ptr).is_boolean()) {
        if (value != 0.0 && value != 1.0)
            throw ConfigError(fmt::format("parameter '{}' takes 0 or 1", path));
        j[ptr] = value == 1.0;
    } else if (j.at(ptr).is_number_integer()) {
        if (value != std::round(value))
            throw ConfigError(fmt::format("parameter '{}' takes integer values", path));
        j[ptr] = static_cast<std::int64_t>(value);
    } else {
        j[ptr] = value;
    }
    return from_json(j);
}

}  // namespace atomint
