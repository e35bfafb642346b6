#pragma once

#include <complex>
#include <vector>

#include "atomint/core_model.hpp"

namespace atomint {

using Complex = std::complex<double>;

/// One retro-reflected laser standing wave acting as a diffraction grating.
///
/// The grating vector lies along x when both mirror angles are zero.
/// `theta_y_rad` tilts the grating planes in the x-z plane (Bragg tuning);
/// `theta_z_rad` gives the grating vector a vertical component.
struct StandingWave
{
    double mirror_x_m = 0.0;
    double theta_y_rad = 0.0;
    double theta_z_rad = 0.0;
    double power_w = 0.0;
    double waist_m = 6.5e-3;        // 1/e^2 intensity radius
    double grating_k_rad_m = 0.0;   // 2 pi / a = 4 pi / lambda_r
    double coupling_scale = 1.0;    // calibration of the two-photon coupling
    double loss_probability = 0.02; // spontaneous emission, removed from the signal

    double period() const;
    void validate() const;
};

/// Standing wave built on the resonance line of `reference`.
StandingWave make_standing_wave(const Species& reference, double power_w);

struct PulseParams
{
    double rabi_rad_s = 0.0;       // effective two-photon Rabi frequency
    double detuning_rad_s = 0.0;   // k_g v (theta_inc - theta_B)
    double duration_s = 0.0;       // square-pulse equivalent interaction time

    double area() const { return rabi_rad_s * duration_s; }
};

/// Complex amplitudes over a contiguous range of diffraction orders.
class DiffractionAmplitudes
{
  public:
    DiffractionAmplitudes() = default;
    DiffractionAmplitudes(int min_order, std::vector<Complex> amplitudes);

    int min_order() const { return min_order_; }
    int max_order() const { return min_order_ + static_cast<int>(amps_.size()) - 1; }
    bool contains(int p) const { return p >= min_order() && p <= max_order(); }

    /// Amplitude of order p; zero outside the stored range.
    Complex operator[](int p) const;
    double population(int p) const { return std::norm((*this)[p]); }
    double total_population() const;

  private:
    int min_order_ = 0;
    std::vector<Complex> amps_;
};

/// Lab-frame recoil frequency hbar k_g^2 / 2m of the momentum ladder.
double recoil_frequency(const StandingWave& wave, double mass_kg);

/// Transverse momentum of a trajectory along the grating vector, in units of
/// hbar k_g. Bragg resonance for order +1 is at q = -1/2.
double incident_momentum(const StandingWave& wave, double mass_kg, double speed_m_s,
                         double angle_rad);

/// Peak two-photon coupling for an atom of the given level, before the
/// Gaussian envelope is applied.
double effective_rabi(const StandingWave& wave, const Species& species,
                      const HyperfineLevel& level);

PulseParams pulse_params(const StandingWave& wave, const AtomSample& atom);

/// Resonant partner (+1 or -1) of a ladder state with momentum q.
///
/// The ladder {q + n} is split into pairs {m + 2j, m + 2j + 1} with m in
/// [-1, 0), so the pair straddling q = 0 is the Bragg-resonant one and the
/// pairing is consistent for every member of the ladder.
int bragg_partner(double q);

/// Square-pulse two-level solution over orders {0, 1}.
DiffractionAmplitudes two_level_bragg(const PulseParams& p);

/// Two-level solution for an arbitrary incident momentum: couples the
/// incident state to bragg_partner(q). `pulse.detuning_rad_s` is ignored; the
/// kinetic detuning follows from q and the recoil frequency.
DiffractionAmplitudes two_level_bragg(const PulseParams& pulse, double incident_q,
                                      double recoil_rad_s);

struct LadderProblem
{
    double rabi_peak_rad_s = 0.0;
    double envelope_sigma_s = 0.0;  // Omega(t) = rabi_peak exp(-t^2 / 2 sigma^2)
    double recoil_rad_s = 0.0;
    double incident_q = 0.0;
    int p_max = 4;
    double window_sigmas = 6.0;

    double max_diagonal() const;
    /// Largest step satisfying dt * max|diagonal| < 0.1.
    double max_step() const;
};

LadderProblem ladder_problem(const StandingWave& wave, const AtomSample& atom, int p_max);

/// Integrates the truncated momentum ladder across the Gaussian pulse.
///
/// Returns interaction-picture amplitudes referenced to the pulse centre,
/// indexed by order relative to the incident state, p in [-p_max, p_max].
/// The propagator is a fourth-order Yoshida composition of Strang steps
/// (exact kinetic phase, exact coupling exponential), unitary to round-off.
DiffractionAmplitudes ladder_integrate(const LadderProblem& problem, double dt);
DiffractionAmplitudes ladder_integrate(const StandingWave& wave, const AtomSample& atom,
                                       int p_max, double dt);

/// |c_{-1}|^2 from a p_max = 4 ladder integration at the default step.
double order_minus_one_suppression(const StandingWave& wave, const AtomSample& atom);

}  // namespace atomint
