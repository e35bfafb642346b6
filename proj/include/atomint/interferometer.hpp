#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atomint/bragg.hpp"
#include "atomint/core_model.hpp"

namespace atomint {

enum class BraggModel
{
    two_level,
    ladder
};

std::string to_string(BraggModel m);
BraggModel parse_bragg_model(std::string const& s);

struct InterferometerConfig
{
    std::vector<Species> species;
    BeamSource source;
    CollimationGeometry geometry;
    std::array<StandingWave, 3> waves;
    std::array<bool, 3> active{true, true, true};

    int detector_port = 1;                // exit the detector slit is centred on
    double detector_slit_offset_m = 0.0;  // slit shift from the nominal port centroid

    BraggModel model = BraggModel::two_level;
    int ladder_p_max = 4;
    // Orders per grating, counted towards the Bragg partner: +1 is the
    // resonant transfer, -1 the opposite, non-resonant one.
    std::vector<int> orders{-1, 0, 1};
    bool include_strays = true;
    double phase_dispersion_rad = 0.0;  // Gaussian per-atom interferometer phase
    double coherence_width_m = 8e-6;
    double spacing_tolerance_m = 1e-3;

    void validate() const;

    /// Species whose mass sets the nominal kinematics (first diffracted one).
    const Species& reference_species() const;
    /// First-order diffraction angle at the mean beam speed.
    double nominal_diffraction_angle() const;
    /// Transverse x of an exit port centroid at the detector-slit plane for
    /// an on-axis atom at the mean speed.
    double port_centroid(int port) const;
    double detector_slit_x() const { return port_centroid(detector_port) + detector_slit_offset_m; }
};

/// Default configuration: 0.605 m grating spacing, 40/80/40 mW standing
/// waves tuned to the Bragg angle, coupling calibrated so the central wave
/// is a pi pulse for 7Li F=2 at the mean speed.
InterferometerConfig default_interferometer();

/// Coupling scale that makes `power_w` a pulse of area `area` for the given
/// level at `speed_m_s`.
double calibrated_coupling_scale(const StandingWave& wave, const Species& species,
                                 const HyperfineLevel& level, double speed_m_s, double area);

enum class PortLabel
{
    stray = 0,
    port1 = 1,
    port2 = 2
};

/// Order sequence through the three gratings with its nominal kinematics.
struct PathTemplate
{
    std::array<int, 3> orders{};   // momentum transfers in units of hbar k_g
    int net_order = 0;             // exit angle is incident + net_order * theta_1
    PortLabel port = PortLabel::stray;

    /// Transverse displacement from the undiffracted ray at plane z, in units
    /// of theta_1 (metres per radian).
    double offset_factor(double z, std::array<double, 3> const& grating_z) const;
};

/// Enumerates every |orders|^3 sequence. `nominal_q` is the incident
/// momentum (units of hbar k_g) of the undiffracted ray at each grating; the
/// Bragg-relative orders are mapped to momentum transfers along it.
std::vector<PathTemplate> enumerate_paths(std::span<const int> orders,
                                          std::array<double, 3> nominal_q = {-0.5, -0.5, -0.5});

/// One atom's amplitude along one path, transported to the detector slit.
struct PathState
{
    PathTemplate path;
    Complex amplitude;
    double exit_angle_rad = 0.0;
    double exit_x_m = 0.0;  // at the detector-slit plane
};

/// Traces `atom` through the active gratings along every template.
/// `extra_phase_rad` is added to the third grating's laser phase.
std::vector<PathState> trace_paths(const InterferometerConfig& config,
                                   std::span<const PathTemplate> templates,
                                   const AtomSample& atom, double extra_phase_rad = 0.0);

struct PortProbabilities
{
    double port1 = 0.0;
    double port2 = 0.0;
    double stray = 0.0;
    double lost = 0.0;  // spontaneous emission
    /// Plane-wave total: paths with equal final momentum summed coherently.
    double coherent_total = 0.0;
};

PortProbabilities port_probabilities(const InterferometerConfig& config, const AtomSample& atom);

/// Fringe phase 2 pi (x_M1 + x_M3 - 2 x_M2) / a.
double mirror_phase(double x_m1, double x_m2, double x_m3, double period_m);

/// Normalised complementary intensities (1 + C cos phi, 1 - C cos phi).
std::pair<double, double> port_intensity(double phase_rad, double contrast);

double delta_k_washout(std::array<double, 3> const& theta_z_rad, double aperture_height_m,
                       double grating_k_rad_m);

double phase_dispersion_contrast(double sigma_rad);

/// Detected-signal decomposition at one port: rate = static + Re(h e^{i dphi})
/// for an extra interferometer phase dphi.
struct PortModel
{
    double static_rate_hz = 0.0;
    Complex harmonic_hz{};

    double rate(double dphi = 0.0) const;
    double contrast() const;
};

struct FringeModel
{
    std::array<PortModel, 2> ports;
    std::vector<std::array<PortModel, 2>> batches;  // for statistical errors
    std::size_t samples = 0;
    double first_order_efficiency = 0.0;  // mean order +1 population at the first
                                          // active grating
    std::vector<double> first_order_batches;

    const PortModel& port(int p) const { return ports.at(static_cast<std::size_t>(p - 1)); }
    /// Batch-means standard error of the port contrast.
    double contrast_error(int p) const;
    double rate_error(int p) const;
    double first_order_error() const;
};

/// Monte Carlo over atoms of the slit-selected port signals at the configured
/// mirror positions. Deterministic per seed for any thread count.
FringeModel fringe_model(const InterferometerConfig& config, std::size_t n_samples,
                         std::uint64_t seed, unsigned threads = 1);

enum class SweepVariable
{
    mirror1_x,
    mirror2_x,
    mirror3_x,
    time,
    detector_slit_x
};

std::string to_string(SweepVariable v);

struct Sweep
{
    SweepVariable variable = SweepVariable::mirror3_x;
    std::vector<double> values;
    // x_M3(t) = x_M3 + piezo_rate * t + piezo_quadratic * t^2 for time sweeps.
    double piezo_rate_m_s = 0.0;
    double piezo_quadratic_m_s2 = 0.0;
};

struct FringePoint
{
    double sweep_value = 0.0;
    int port = 0;  // 0 for a single-slit profile
    double expected_rate_hz = 0.0;
    double static_rate_hz = 0.0;
    Complex interference_hz{};
    std::int64_t counts = 0;
};

struct FringeScan
{
    std::string variable;
    double bin_s = 1.0;
    std::vector<FringePoint> points;

    std::vector<FringePoint> port(int p) const;
};

/// Extra interferometer phase produced by a sweep value.
double sweep_phase(const InterferometerConfig& config, const Sweep& sweep, double value);

FringeScan evaluate_sweep(const InterferometerConfig& config, const FringeModel& model,
                          const Sweep& sweep, double bin_s);

FringeScan monte_carlo_fringe(const InterferometerConfig& config, const Sweep& sweep,
                              std::size_t n_samples, std::uint64_t seed, unsigned threads = 1,
                              double bin_s = 0.1);

struct DiffractionProfile
{
    FringeScan scan;
    std::map<int, double> order_population;  // mean over atoms, per momentum transfer
    double order_separation_m = 0.0;         // theta_1 (z_SD - z_grating)
};

/// Count rate versus detector-slit position with exactly one active grating.
DiffractionProfile diffraction_profile(const InterferometerConfig& config,
                                       std::span<const double> slit_x_m, std::size_t n_samples,
                                       std::uint64_t seed, unsigned threads = 1,
                                       double bin_s = 1.0);

}  // namespace atomint
