#include "atomint/core_model.hpp"

#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "atomint/constants.hpp"
#include "atomint/errors.hpp"

namespace atomint {

namespace c = constants;

void Species::validate() const
{
    if (!(mass_kg > 0))
        throw ConfigError(fmt::format("species {}: mass must be positive", name));
    if (!(resonance_wavelength_m > 0))
        throw ConfigError(fmt::format("species {}: resonance wavelength must be positive", name));
    if (!(abundance >= 0 && abundance <= 1))
        throw ConfigError(fmt::format("species {}: abundance outside [0, 1]", name));
    if (levels.empty())
        throw ConfigError(fmt::format("species {}: no hyperfine levels", name));
    for (auto const& lvl : levels) {
        if (lvl.degeneracy <= 0)
            throw ConfigError(fmt::format("species {}: level F={} has non-positive degeneracy",
                                          name, lvl.f));
        if (diffracted && std::abs(lvl.detuning_rad_s) < 10.0 * linewidth_rad_s)
            throw ConfigError(fmt::format(
                "species {}: level F={} detuning is not large compared to the linewidth", name,
                lvl.f));
    }
    if (diffracted && !(linewidth_rad_s > 0 && saturation_intensity_w_m2 > 0))
        throw ConfigError(
            fmt::format("species {}: diffracted species needs linewidth and I_sat", name));
}

void validate_species(std::span<const Species> species)
{
    if (species.empty())
        throw ConfigError("species list is empty");
    double total = 0;
    for (auto const& s : species) {
        s.validate();
        total += s.abundance;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError(fmt::format("species abundances sum to {:.12f}, expected 1", total));
}

std::vector<Species> natural_lithium()
{
    Species li7;
    li7.name = "Li7";
    li7.mass_kg = 7.016003 * c::atomic_mass_unit;
    li7.abundance = 0.926;
    li7.resonance_wavelength_m = 670.977e-9;
    li7.linewidth_rad_s = c::two_pi * 5.87e6;
    li7.saturation_intensity_w_m2 = 25.4;  // 2.54 mW/cm^2
    li7.levels = {{1, 3, c::two_pi * 2.1e9}, {2, 5, c::two_pi * 2.9e9}};

    Species li6;
    li6.name = "Li6";
    li6.mass_kg = 6.015122 * c::atomic_mass_unit;
    li6.abundance = 0.074;
    li6.resonance_wavelength_m = 670.979e-9;
    li6.linewidth_rad_s = c::two_pi * 5.87e6;
    li6.saturation_intensity_w_m2 = 25.4;
    // F = 1/2 and 3/2 are stored as 2F so the field stays integral.
    li6.levels = {{1, 2, 0.0}, {3, 4, 0.0}};
    li6.diffracted = false;

    return {li7, li6};
}

void BeamSource::validate() const
{
    if (!(mean_speed_m_s > 0))
        throw ConfigError("beam: mean speed must be positive");
    if (!(speed_ratio > 1))
        throw ConfigError("beam: speed ratio must exceed 1");
    if (!(flux_hz >= 0))
        throw ConfigError("beam: flux must be non-negative");
    if (!(temperature_k > 0) || !(carrier_mass_kg > 0))
        throw ConfigError("beam: temperature and carrier mass must be positive");
}

BeamSource default_beam_source()
{
    BeamSource src;
    src.carrier_mass_kg = c::argon_mass;
    return src;
}

void CollimationGeometry::validate() const
{
    std::array<double, 7> z{slit0_z_m,     slit1_z_m,         mirror_z_m[0], mirror_z_m[1],
                            mirror_z_m[2], detector_slit_z_m, detector_z_m};
    for (std::size_t i = 1; i < z.size(); ++i) {
        if (!(z[i] > z[i - 1]))
            throw ConfigError(fmt::format(
                "geometry: z positions must be strictly increasing along the beamline "
                "(element {} at {} m is not after {} m)",
                i, z[i], z[i - 1]));
    }
    for (double w : {slit0_width_m, slit1_width_m, detector_slit_width_m, ribbon_width_m,
                     aperture_height_m}) {
        if (!(w > 0))
            throw ConfigError("geometry: all widths must be positive");
    }
}

double de_broglie(double mass_kg, double speed_m_s)
{
    if (!(mass_kg > 0) || !(speed_m_s > 0))
        throw DomainError("de_broglie: mass and speed must be positive");
    return c::planck / (mass_kg * speed_m_s);
}

double diffraction_angle(double wavelength_m, double period_m)
{
    if (!(period_m > 0))
        throw DomainError("diffraction_angle: grating period must be positive");
    return wavelength_m / period_m;
}

double bragg_angle(double wavelength_m, double period_m)
{
    return 0.5 * diffraction_angle(wavelength_m, period_m);
}

double supersonic_terminal_velocity(double temperature_k, double carrier_mass_kg)
{
    if (!(temperature_k > 0) || !(carrier_mass_kg > 0))
        throw DomainError("supersonic_terminal_velocity: temperature and mass must be positive");
    // Full isentropic expansion of a monatomic gas: v = sqrt(2 cp T / m), cp = 5/2 kB.
    return std::sqrt(5.0 * c::boltzmann * temperature_k / carrier_mass_kg);
}

namespace {

template<class Weights>
std::size_t draw_index(Weights const& weights, double total, Rng& rng)
{
    std::uniform_real_distribution<double> uni(0.0, total);
    double u = uni(rng);
    std::size_t i = 0;
    for (; i + 1 < weights.size(); ++i) {
        if (u < weights[i])
            break;
        u -= weights[i];
    }
    return i;
}

}  // namespace

AtomSample sample_atom(const BeamSource& source,
                       const CollimationGeometry& geom,
                       std::span<const Species> species,
                       Rng& rng)
{
    if (species.empty())
        throw ConfigError("sample_atom: species list is empty");
    if (!(geom.slit1_z_m - geom.slit0_z_m > 0))
        throw ConfigError("sample_atom: collimation slits must be separated along z");

    AtomSample atom;

    std::vector<double> abund;
    abund.reserve(species.size());
    for (auto const& s : species)
        abund.push_back(s.abundance);
    atom.species = &species[draw_index(abund, std::accumulate(abund.begin(), abund.end(), 0.0), rng)];

    std::vector<double> degen;
    for (auto const& lvl : atom.species->levels)
        degen.push_back(lvl.degeneracy);
    atom.level = &atom.species->levels[draw_index(
        degen, std::accumulate(degen.begin(), degen.end(), 0.0), rng)];

    std::normal_distribution<double> speed_dist(source.mean_speed_m_s, source.speed_spread());
    do {
        atom.speed_m_s = speed_dist(rng);
    } while (!(atom.speed_m_s > 0));

    // Uniform points in both slits give a uniform density over the (x, theta)
    // acceptance parallelogram; the Jacobian of the map is constant.
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    double const x0 = geom.slit0_width_m * unit(rng);
    double const x1 = geom.slit1_width_m * unit(rng);
    atom.offset_m = x1;
    atom.angle_rad = (x1 - x0) / (geom.slit1_z_m - geom.slit0_z_m);
    atom.height_m = geom.aperture_height_m * unit(rng);
    atom.weight = 1.0;
    return atom;
}

}  // namespace atomint
