#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "atomint/random.hpp"

namespace atomint {

struct HyperfineLevel
{
    int f = 0;                    // total angular momentum quantum number F
    int degeneracy = 1;           // 2F + 1
    double detuning_rad_s = 0.0;  // laser detuning from this level, > 0 is blue
};

struct Species
{
    std::string name;
    double mass_kg = 0.0;
    double abundance = 1.0;
    double resonance_wavelength_m = 0.0;
    double linewidth_rad_s = 0.0;  // natural linewidth Gamma
    double saturation_intensity_w_m2 = 0.0;
    std::vector<HyperfineLevel> levels;
    // False for isotopes the grating laser is too far detuned to diffract.
    bool diffracted = true;

    double grating_period() const { return 0.5 * resonance_wavelength_m; }
    void validate() const;
};

/// Natural lithium: 7Li (diffracted, F=1 and F=2 detuned by 2.1 and 2.9 GHz)
/// and 6Li (transmitted undiffracted).
std::vector<Species> natural_lithium();

/// Checks every species and that abundances sum to one.
void validate_species(std::span<const Species> species);

struct BeamSource
{
    double mean_speed_m_s = 1050.0;
    double speed_ratio = 8.0;  // v0 / sigma_v
    double temperature_k = 1050.0;
    double carrier_mass_kg = 0.0;
    double flux_hz = 2.0e5;  // atoms/s transmitted by the two collimation slits

    double speed_spread() const { return mean_speed_m_s / speed_ratio; }
    void validate() const;
};

BeamSource default_beam_source();

/// Beamline positions are measured from the nozzle along z.
struct CollimationGeometry
{
    double slit0_z_m = 0.480;
    double slit0_width_m = 20e-6;
    double slit1_z_m = 1.260;
    double slit1_width_m = 12e-6;
    std::array<double, 3> mirror_z_m{1.410, 2.015, 2.620};
    double detector_slit_z_m = 3.020;
    double detector_z_m = 3.370;
    double detector_slit_width_m = 30e-6;
    double ribbon_width_m = 760e-6;
    double aperture_height_m = 3e-3;

    /// Full width of the angular acceptance of the two collimation slits.
    double angular_acceptance() const
    {
        return (slit0_width_m + slit1_width_m) / (slit1_z_m - slit0_z_m);
    }
    void validate() const;
};

struct AtomSample
{
    const Species* species = nullptr;  // non-owning, points into the species table
    const HyperfineLevel* level = nullptr;
    double weight = 1.0;
    double speed_m_s = 0.0;
    double angle_rad = 0.0;   // transverse angle theta_x
    double offset_m = 0.0;    // transverse x at slit S1
    double height_m = 0.0;    // vertical y within the aperture

    double x_at(double z, const CollimationGeometry& geom) const
    {
        return offset_m + angle_rad * (z - geom.slit1_z_m);
    }
};

double de_broglie(double mass_kg, double speed_m_s);
double diffraction_angle(double wavelength_m, double period_m);
double bragg_angle(double wavelength_m, double period_m);
double supersonic_terminal_velocity(double temperature_k, double carrier_mass_kg);

/// Draws one atom uniformly from the phase-space acceptance of the two slits.
AtomSample sample_atom(const BeamSource& source,
                       const CollimationGeometry& geom,
                       std::span<const Species> species,
                       Rng& rng);

}  // namespace atomint
