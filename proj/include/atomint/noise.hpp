#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "atomint/interferometer.hpp"

namespace atomint {

struct DetectorModel
{
    double efficiency = 0.4;      // detection probability per arriving atom
    double background_hz = 3370;  // dark count rate with the beam flagged
    double burst_rate_hz = 0.0;   // rare noise bursts, off by default
    double burst_counts = 0.0;    // counts added per burst

    void validate() const;
};

/// Mirror vibration projected on x_M1 + x_M3 - 2 x_M2.
struct VibrationModel
{
    double rms_m = 3e-9;
    double bandwidth_hz = 50e3;

    void validate() const;
};

struct CountRecord
{
    std::vector<double> t_start_s;
    double bin_s = 0.1;
    std::vector<std::int64_t> counts;
    // Bins recorded with the atomic beam flagged; empty means none.
    std::vector<bool> beam_blocked;

    std::size_t size() const { return counts.size(); }
    double bin_center(std::size_t i) const { return t_start_s[i] + 0.5 * bin_s; }
    bool blocked(std::size_t i) const { return i < beam_blocked.size() && beam_blocked[i]; }
};

double vibration_phase_rms(const VibrationModel& vib, double period_m);

/// Poisson counts per bin with mean bin * (efficiency * rate(t_mid) + background),
/// plus optional bursts. Deterministic per seed.
CountRecord simulate_counts(std::function<double(double)> const& rate_hz,
                            const DetectorModel& det, double bin_s, double duration_s,
                            std::uint64_t seed, double t0_s = 0.0);

/// Fills the `counts` field of every point of `scan` (bin = scan.bin_s).
void simulate_counts(FringeScan& scan, const DetectorModel& det, std::uint64_t seed);

/// Count record of one port of a time-parameterised scan; bins are centred
/// on the sweep values.
CountRecord to_count_record(const FringeScan& scan, int port);

/// Adds an independent Gaussian interferometer phase of rms 2 pi rms / a to
/// each sweep step (shared by both ports of that step).
FringeScan apply_vibration_jitter(FringeScan scan, const VibrationModel& vib, double period_m,
                                  std::uint64_t seed);

}  // namespace atomint
