#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "atomint/noise.hpp"

namespace atomint {

struct FitOptions
{
    /// Fixed background (counts/s). When empty the background is fitted,
    /// which needs beam-blocked bins in the record.
    std::optional<double> background_hz;
    bool fit_quadratic = true;
    /// Known phase rate (rad/s at the record centre) to narrow the grid.
    std::optional<double> phase_rate_guess;
    double phase_rate_window = 0.25;  // fractional half-width around the guess
    bool fix_phase_rate = false;      // hold phi1 at the guess
    int max_iterations = 200;
};

/// rate(t) = B + I (1 + C cos(phi0 + phi1 (t - t_ref) + phi2 (t - t_ref)^2))
struct FringeFit
{
    double mean_rate_hz = 0.0;
    double background_hz = 0.0;
    bool background_fitted = false;
    double contrast = 0.0;
    double phi0 = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;
    double t_ref_s = 0.0;

    double mean_rate_err = 0.0;
    double background_err = 0.0;
    double contrast_err = 0.0;
    double phi0_err = 0.0;
    double phi1_err = 0.0;
    double phi2_err = 0.0;

    double chi_square = 0.0;
    int dof = 0;
    int iterations = 0;

    double phase(double t) const;
    double rate(double t) const;
};

/// Weighted (Poisson) least squares of the fringe model to counts per bin.
FringeFit fit_fringes(std::span<const double> t_center_s, std::span<const double> counts,
                      double bin_s, const FitOptions& opts = {},
                      std::span<const bool> beam_blocked = {});
FringeFit fit_fringes(const CountRecord& rec, const FitOptions& opts = {});

struct BootstrapErrors
{
    double mean_rate_err = 0.0;
    double contrast_err = 0.0;
    double phi0_err = 0.0;
    double phi1_err = 0.0;
    double phi2_err = 0.0;
    int resamples = 0;
};

/// Parametric bootstrap: refits Poisson redraws of the fitted model.
BootstrapErrors bootstrap_fit(const CountRecord& rec, const FringeFit& fit,
                              const FitOptions& opts, int resamples, std::uint64_t seed);

struct SensitivityReport
{
    double measured_rad_sqrt_hz = 0.0;
    double shot_noise_rad_sqrt_hz = 0.0;
    double figure_of_merit_hz = 0.0;
};

double contrast(double i_max, double i_min);
double figure_of_merit(double mean_rate, double contrast);
/// Mid-fringe phase noise sqrt(I + B) / (C I) for one second of counting.
double shot_noise_limit(double mean_rate, double background, double contrast);
/// Residual scatter converted to phase through the local fringe slope,
/// using bins with |cos phi| <= 0.5, normalised to 1 s.
double measured_sensitivity(const CountRecord& rec, const FringeFit& fit);
SensitivityReport sensitivity_report(const CountRecord& rec, const FringeFit& fit);
double min_detectable_perturbation(double phase_rad, double interaction_time_s);
double phase_noise_contrast_budget(double ideal_contrast, std::span<const double> sigma_rad);

/// Linear fit y = offset + amplitude cos(2 pi x / period + phase), amplitude >= 0.
struct SineFit
{
    double offset = 0.0;
    double amplitude = 0.0;
    double phase = 0.0;
    double contrast() const { return offset != 0.0 ? amplitude / offset : 0.0; }
};

SineFit fit_sinusoid(std::span<const double> x, std::span<const double> y, double period);

struct Peak
{
    double position = 0.0;  // centroid of the region above half height
    double height = 0.0;
};

/// Local maxima above `threshold` times the global maximum and separated by
/// more than `min_separation`, sorted by position.
std::vector<Peak> find_peaks(std::span<const double> x, std::span<const double> y,
                             double min_separation, double threshold = 0.2);

}  // namespace atomint
