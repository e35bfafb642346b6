#include "atomint/bragg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "atomint/constants.hpp"
#include "atomint/errors.hpp"

namespace atomint {

namespace c = constants;

double StandingWave::period() const
{
    return c::two_pi / grating_k_rad_m;
}

void StandingWave::validate() const
{
    if (!(power_w >= 0))
        throw ConfigError("standing wave: power must be non-negative");
    if (!(waist_m > 0))
        throw ConfigError("standing wave: waist must be positive");
    if (!(grating_k_rad_m > 0))
        throw ConfigError("standing wave: grating wavevector must be positive");
    if (!(coupling_scale >= 0))
        throw ConfigError("standing wave: coupling scale must be non-negative");
    if (!(loss_probability >= 0 && loss_probability < 1))
        throw ConfigError("standing wave: loss probability must lie in [0, 1)");
}

StandingWave make_standing_wave(const Species& reference, double power_w)
{
    StandingWave w;
    w.power_w = power_w;
    w.grating_k_rad_m = 2.0 * c::two_pi / reference.resonance_wavelength_m;
    return w;
}

DiffractionAmplitudes::DiffractionAmplitudes(int min_order, std::vector<Complex> amplitudes)
    : min_order_(min_order), amps_(std::move(amplitudes))
{
}

Complex DiffractionAmplitudes::operator[](int p) const
{
    if (!contains(p))
        return {0.0, 0.0};
    return amps_[static_cast<std::size_t>(p - min_order_)];
}

double DiffractionAmplitudes::total_population() const
{
    double sum = 0;
    for (auto const& a : amps_)
        sum += std::norm(a);
    return sum;
}

double recoil_frequency(const StandingWave& wave, double mass_kg)
{
    return c::hbar * wave.grating_k_rad_m * wave.grating_k_rad_m / (2.0 * mass_kg);
}

double incident_momentum(const StandingWave& wave, double mass_kg, double speed_m_s,
                         double angle_rad)
{
    return mass_kg * speed_m_s * (angle_rad - wave.theta_y_rad) / (c::hbar * wave.grating_k_rad_m);
}

double effective_rabi(const StandingWave& wave, const Species& species,
                      const HyperfineLevel& level)
{
    if (!(wave.waist_m > 0))
        throw DomainError("effective_rabi: waist must be positive");
    if (!species.diffracted || wave.power_w == 0.0)
        return 0.0;
    double const peak_intensity = 2.0 * wave.power_w / (c::pi * wave.waist_m * wave.waist_m);
    double const gamma = species.linewidth_rad_s;
    double const one_photon_sq =
        gamma * gamma * peak_intensity / (2.0 * species.saturation_intensity_w_m2);
    return wave.coupling_scale * one_photon_sq / (2.0 * std::abs(level.detuning_rad_s));
}

PulseParams pulse_params(const StandingWave& wave, const AtomSample& atom)
{
    if (!(atom.speed_m_s > 0))
        throw DomainError("pulse_params: atom speed must be positive");
    if (!(wave.waist_m > 0))
        throw DomainError("pulse_params: waist must be positive");
    PulseParams p;
    p.rabi_rad_s = effective_rabi(wave, *atom.species, *atom.level);
    p.duration_s = std::sqrt(c::pi / 2.0) * wave.waist_m / atom.speed_m_s;
    double const lambda_db = de_broglie(atom.species->mass_kg, atom.speed_m_s);
    double const theta_b = bragg_angle(lambda_db, wave.period());
    double const theta_inc = wave.theta_y_rad - atom.angle_rad;
    p.detuning_rad_s = wave.grating_k_rad_m * atom.speed_m_s * (theta_inc - theta_b);
    return p;
}

namespace {

struct TwoLevelAmplitudes
{
    Complex stay;
    Complex transfer;
};

// Square pulse of length tau centred on t = 0 for H = [[0, W/2], [W/2, delta]],
// in the interaction picture with respect to diag(0, delta).
TwoLevelAmplitudes two_level_unitary(double rabi, double delta, double tau)
{
    double const gen = std::hypot(rabi, delta);
    if (gen == 0.0)
        return {{1.0, 0.0}, {0.0, 0.0}};
    double const cs = std::cos(0.5 * gen * tau);
    double const sn = std::sin(0.5 * gen * tau);
    Complex const stay = std::polar(1.0, -0.5 * delta * tau) * Complex(cs, delta * sn / gen);
    Complex const transfer(0.0, -rabi * sn / gen);
    return {stay, transfer};
}

}  // namespace

int bragg_partner(double q)
{
    auto const steps = static_cast<long>(std::floor(q)) + 1;
    return steps % 2 == 0 ? 1 : -1;
}

DiffractionAmplitudes two_level_bragg(const PulseParams& p)
{
    // Upper-state kinetic detuning is -Delta (see incident_momentum).
    auto const u = two_level_unitary(p.rabi_rad_s, -p.detuning_rad_s, p.duration_s);
    return DiffractionAmplitudes(0, {u.stay, u.transfer});
}

DiffractionAmplitudes two_level_bragg(const PulseParams& pulse, double incident_q,
                                      double recoil_rad_s)
{
    int const partner = bragg_partner(incident_q);
    double const delta = recoil_rad_s * (2.0 * incident_q * partner + 1.0);
    auto const u = two_level_unitary(pulse.rabi_rad_s, delta, pulse.duration_s);
    if (partner == 1)
        return DiffractionAmplitudes(0, {u.stay, u.transfer});
    return DiffractionAmplitudes(-1, {u.transfer, u.stay});
}

double LadderProblem::max_diagonal() const
{
    double m = 0;
    for (int p = -p_max; p <= p_max; ++p) {
        double const d = recoil_rad_s * ((p + incident_q) * (p + incident_q) - incident_q * incident_q);
        m = std::max(m, std::abs(d));
    }
    return m;
}

double LadderProblem::max_step() const
{
    return 0.1 / max_diagonal();
}

LadderProblem ladder_problem(const StandingWave& wave, const AtomSample& atom, int p_max)
{
    auto const pulse = pulse_params(wave, atom);
    LadderProblem pr;
    pr.rabi_peak_rad_s = pulse.rabi_rad_s;
    // Gaussian intensity profile exp(-2 z^2 / w^2) crossed at speed v.
    pr.envelope_sigma_s = 0.5 * wave.waist_m / atom.speed_m_s;
    pr.recoil_rad_s = recoil_frequency(wave, atom.species->mass_kg);
    pr.incident_q = incident_momentum(wave, atom.species->mass_kg, atom.speed_m_s, atom.angle_rad);
    pr.p_max = p_max;
    return pr;
}

DiffractionAmplitudes ladder_integrate(const LadderProblem& pr, double dt)
{
    if (pr.p_max < 2)
        throw DomainError("ladder_integrate: p_max must be at least 2");
    if (!(pr.envelope_sigma_s > 0))
        throw DomainError("ladder_integrate: envelope duration must be positive");
    if (!(dt > 0))
        throw DomainError("ladder_integrate: time step must be positive");
    if (!(dt * pr.max_diagonal() < 0.1))
        throw UnstableStepError(fmt::format(
            "ladder_integrate: dt = {:.3e} s does not resolve the fastest kinetic phase; "
            "use dt < {:.3e} s",
            dt, pr.max_step()));

    int const n = 2 * pr.p_max + 1;
    auto const un = static_cast<std::size_t>(n);

    std::vector<double> omega(un);
    for (int j = 0; j < n; ++j) {
        double const p = j - pr.p_max;
        omega[static_cast<std::size_t>(j)] =
            pr.recoil_rad_s * ((p + pr.incident_q) * (p + pr.incident_q) - pr.incident_q * pr.incident_q);
    }

    // Nearest-neighbour coupling with 1/2 off-diagonals has the closed-form
    // eigensystem lambda_k = cos(k pi / (n + 1)), sine eigenvectors.
    std::vector<double> lambda(un);
    std::vector<double> modes(un * un);
    double const norm = std::sqrt(2.0 / (n + 1));
    for (int k = 0; k < n; ++k) {
        lambda[static_cast<std::size_t>(k)] = std::cos((k + 1) * c::pi / (n + 1));
        for (int j = 0; j < n; ++j)
            modes[static_cast<std::size_t>(j * n + k)] =
                norm * std::sin((j + 1) * (k + 1) * c::pi / (n + 1));
    }

    double const half_window = pr.window_sigmas * pr.envelope_sigma_s;
    auto const steps = static_cast<long>(std::ceil(2.0 * half_window / dt));
    double const h = 2.0 * half_window / static_cast<double>(steps);

    // Triple-jump weights for a fourth-order symmetric composition.
    double const cbrt2 = std::cbrt(2.0);
    double const w_outer = 1.0 / (2.0 - cbrt2);
    double const w_inner = -cbrt2 / (2.0 - cbrt2);

    auto kinetic_factors = [&](double hs) {
        std::vector<Complex> f(un);
        for (std::size_t j = 0; j < un; ++j)
            f[j] = std::polar(1.0, -0.5 * omega[j] * hs);
        return f;
    };
    auto const kin_outer = kinetic_factors(w_outer * h);
    auto const kin_inner = kinetic_factors(w_inner * h);

    std::vector<Complex> state(un, Complex{});
    state[static_cast<std::size_t>(pr.p_max)] = 1.0;
    std::vector<Complex> modal(un);

    double t = -half_window;
    double const inv_two_sigma_sq = 1.0 / (2.0 * pr.envelope_sigma_s * pr.envelope_sigma_s);

    auto substep = [&](double hs, std::vector<Complex> const& kin) {
        for (std::size_t j = 0; j < un; ++j)
            state[j] *= kin[j];
        double const tm = t + 0.5 * hs;
        double const rabi = pr.rabi_peak_rad_s * std::exp(-tm * tm * inv_two_sigma_sq);
        for (std::size_t k = 0; k < un; ++k) {
            Complex acc{};
            for (std::size_t j = 0; j < un; ++j)
                acc += modes[j * un + k] * state[j];
            modal[k] = acc * std::polar(1.0, -rabi * hs * lambda[k]);
        }
        for (std::size_t j = 0; j < un; ++j) {
            Complex acc{};
            for (std::size_t k = 0; k < un; ++k)
                acc += modes[j * un + k] * modal[k];
            state[j] = acc * kin[j];
        }
        t += hs;
    };

    for (long s = 0; s < steps; ++s) {
        substep(w_outer * h, kin_outer);
        substep(w_inner * h, kin_inner);
        substep(w_outer * h, kin_outer);
    }

    std::vector<Complex> out(un);
    for (std::size_t j = 0; j < un; ++j)
        out[j] = state[j] * std::polar(1.0, omega[j] * half_window);
    return DiffractionAmplitudes(-pr.p_max, std::move(out));
}

DiffractionAmplitudes ladder_integrate(const StandingWave& wave, const AtomSample& atom,
                                       int p_max, double dt)
{
    return ladder_integrate(ladder_problem(wave, atom, p_max), dt);
}

double order_minus_one_suppression(const StandingWave& wave, const AtomSample& atom)
{
    auto const pr = ladder_problem(wave, atom, 4);
    return ladder_integrate(pr, 0.99 * pr.max_step()).population(-1);
}

}  // namespace atomint
