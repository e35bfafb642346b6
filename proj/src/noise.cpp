#include "atomint/noise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "atomint/constants.hpp"
#include "atomint/errors.hpp"
#include "atomint/random.hpp"

namespace atomint {

namespace {

// Salts keep the count and jitter streams independent of the atom streams.
constexpr std::uint64_t count_salt = 0x636f756e74ULL;
constexpr std::uint64_t jitter_salt = 0x6a69747465ULL;

std::int64_t draw_counts(double mean, const DetectorModel& det, double bin_s, Rng& rng)
{
    std::int64_t n = 0;
    if (mean > 0)
        n = std::poisson_distribution<std::int64_t>(mean)(rng);
    if (det.burst_rate_hz > 0 && det.burst_counts > 0) {
        auto const bursts = std::poisson_distribution<std::int64_t>(det.burst_rate_hz * bin_s)(rng);
        n += static_cast<std::int64_t>(std::llround(static_cast<double>(bursts) * det.burst_counts));
    }
    return n;
}

}  // namespace

void DetectorModel::validate() const
{
    if (!(efficiency >= 0 && efficiency <= 1))
        throw ConfigError("detector: efficiency must lie in [0, 1]");
    if (!(background_hz >= 0))
        throw ConfigError("detector: background rate must be non-negative");
    if (!(burst_rate_hz >= 0) || !(burst_counts >= 0))
        throw ConfigError("detector: burst parameters must be non-negative");
}

void VibrationModel::validate() const
{
    if (!(rms_m >= 0))
        throw ConfigError("vibration: rms must be non-negative");
    if (!(bandwidth_hz > 0))
        throw ConfigError("vibration: bandwidth must be positive");
}

double vibration_phase_rms(const VibrationModel& vib, double period_m)
{
    if (!(period_m > 0))
        throw DomainError("vibration_phase_rms: period must be positive");
    return constants::two_pi * vib.rms_m / period_m;
}

CountRecord simulate_counts(std::function<double(double)> const& rate_hz,
                            const DetectorModel& det, double bin_s, double duration_s,
                            std::uint64_t seed, double t0_s)
{
    if (!(bin_s > 0))
        throw DomainError("simulate_counts: bin width must be positive");
    det.validate();
    auto const n = static_cast<std::size_t>(std::llround(duration_s / bin_s));
    CountRecord rec;
    rec.bin_s = bin_s;
    rec.t_start_s.reserve(n);
    rec.counts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double const t = t0_s + static_cast<double>(i) * bin_s;
        double const r = rate_hz(t + 0.5 * bin_s);
        if (!(r >= 0))
            throw DomainError("simulate_counts: rate function returned a negative rate");
        Rng rng = make_substream(seed, i, count_salt);
        rec.t_start_s.push_back(t);
        rec.counts.push_back(
            draw_counts(bin_s * (det.efficiency * r + det.background_hz), det, bin_s, rng));
    }
    return rec;
}

void simulate_counts(FringeScan& scan, const DetectorModel& det, std::uint64_t seed)
{
    det.validate();
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
        auto& pt = scan.points[i];
        if (!(pt.expected_rate_hz >= 0))
            throw DomainError("simulate_counts: negative expected rate");
        Rng rng = make_substream(seed, i, count_salt);
        pt.counts = draw_counts(
            scan.bin_s * (det.efficiency * pt.expected_rate_hz + det.background_hz), det,
            scan.bin_s, rng);
    }
}

CountRecord to_count_record(const FringeScan& scan, int port)
{
    CountRecord rec;
    rec.bin_s = scan.bin_s;
    for (auto const& pt : scan.points) {
        if (pt.port != port)
            continue;
        rec.t_start_s.push_back(pt.sweep_value - 0.5 * scan.bin_s);
        rec.counts.push_back(pt.counts);
    }
    return rec;
}

FringeScan apply_vibration_jitter(FringeScan scan, const VibrationModel& vib, double period_m,
                                  std::uint64_t seed)
{
    double const sigma = vibration_phase_rms(vib, period_m);
    if (sigma == 0.0)
        return scan;
    std::size_t step = 0;
    double phase = 0.0;
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
        auto& pt = scan.points[i];
        if (i == 0 || pt.sweep_value != scan.points[i - 1].sweep_value) {
            Rng rng = make_substream(seed, step++, jitter_salt);
            phase = std::normal_distribution<double>(0.0, sigma)(rng);
        }
        pt.interference_hz *= std::polar(1.0, phase);
        pt.expected_rate_hz = std::max(0.0, pt.static_rate_hz + std::real(pt.interference_hz));
    }
    return scan;
}

}  // namespace atomint
