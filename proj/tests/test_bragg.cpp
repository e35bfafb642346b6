#include <doctest.h>

#include <cmath>
#include <random>

#include "atomint/bragg.hpp"
#include "atomint/constants.hpp"
#include "atomint/errors.hpp"

using namespace atomint;
namespace c = atomint::constants;

namespace {

struct Fixture
{
    std::vector<Species> species = natural_lithium();
    Species const& li7 = species.front();
    StandingWave wave = make_standing_wave(li7, 0.080);
    AtomSample atom;

    Fixture()
    {
        atom.species = &li7;
        atom.level = &li7.levels.back();
        atom.speed_m_s = 1050.0;
        wave.theta_y_rad = theta_b();
    }

    double theta_b() const
    {
        return bragg_angle(de_broglie(li7.mass_kg, atom.speed_m_s), wave.period());
    }

    /// Ladder problem with the given pulse area and incident momentum.
    LadderProblem problem(double area, double q, double sigma_s = 3.1e-6, int p_max = 4) const
    {
        LadderProblem pr;
        pr.envelope_sigma_s = sigma_s;
        pr.rabi_peak_rad_s = area / (sigma_s * std::sqrt(c::two_pi));
        pr.recoil_rad_s = recoil_frequency(wave, li7.mass_kg);
        pr.incident_q = q;
        pr.p_max = p_max;
        return pr;
    }
};

DiffractionAmplitudes integrate(LadderProblem const& pr)
{
    return ladder_integrate(pr, 0.99 * pr.max_step());
}

}  // namespace

TEST_CASE("pulse parameters")
{
    Fixture f;
    auto const p = pulse_params(f.wave, f.atom);
    CHECK(p.detuning_rad_s == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(p.duration_s == doctest::Approx(std::sqrt(c::pi / 2) * 6.5e-3 / 1050.0));

    auto doubled = f.wave;
    doubled.power_w *= 2;
    CHECK(pulse_params(doubled, f.atom).rabi_rad_s == doctest::Approx(2.0 * p.rabi_rad_s));

    // Independent evaluation of the far-detuned coupling, unscaled calibration.
    double const i_peak = 2.0 * 0.080 / (c::pi * 6.5e-3 * 6.5e-3);
    double const gamma = c::two_pi * 5.87e6;
    double const omega1_sq = gamma * gamma * i_peak / (2.0 * 25.4);
    double const omega_eff = omega1_sq / (2.0 * c::two_pi * 2.9e9);
    CHECK(p.rabi_rad_s == doctest::Approx(omega_eff).epsilon(1e-3));
    double const area = p.area();
    CHECK(area > c::pi / 3.0);
    CHECK(area < 3.0 * c::pi);
    CHECK(area == doctest::Approx(6.87).epsilon(0.01));

    auto tilted = f.wave;
    tilted.theta_y_rad += 10e-6;
    CHECK(pulse_params(tilted, f.atom).detuning_rad_s
          == doctest::Approx(f.wave.grating_k_rad_m * 1050.0 * 10e-6));

    auto bad = f.wave;
    bad.waist_m = 0.0;
    CHECK_THROWS_AS(pulse_params(bad, f.atom), DomainError);
    auto slow = f.atom;
    slow.speed_m_s = 0.0;
    CHECK_THROWS_AS(pulse_params(f.wave, slow), DomainError);

    auto li6 = f.atom;
    li6.species = &f.species.back();
    li6.level = &f.species.back().levels.front();
    CHECK(pulse_params(f.wave, li6).rabi_rad_s == 0.0);
}

TEST_CASE("two-level Bragg pulses")
{
    auto pop1 = [](double rabi, double detuning, double tau) {
        return two_level_bragg(PulseParams{rabi, detuning, tau}).population(1);
    };
    CHECK(pop1(1.0, 0.0, c::pi) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pop1(1.0, 0.0, c::pi / 2) == doctest::Approx(0.5).epsilon(1e-15));
    double const oracle = 0.5 * std::pow(std::sin(c::pi / std::sqrt(2.0)), 2);
    CHECK(pop1(1.0, 1.0, c::pi) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(oracle == doctest::Approx(0.3166).epsilon(1e-3));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        auto const a = two_level_bragg(PulseParams{std::abs(u(rng)), u(rng), std::abs(u(rng))});
        REQUIRE(a.total_population() == doctest::Approx(1.0).epsilon(1e-12));
        REQUIRE(a.min_order() == 0);
        REQUIRE(a.max_order() == 1);
    }

    for (double area = 0.1; area < 6.0; area += 0.37) {
        double const a = pop1(area, 0.0, 1.0);
        double const b = pop1(area + c::two_pi, 0.0, 1.0);
        CHECK(std::abs(a - b) < 1e-6);
    }
}

TEST_CASE("Bragg partner keeps the grating map unitary")
{
    CHECK(bragg_partner(-0.5) == 1);
    CHECK(bragg_partner(0.5) == -1);
    CHECK(bragg_partner(-1.5) == -1);
    CHECK(bragg_partner(1.5) == 1);

    // Adjacent ladder states pair with each other.
    for (double q : {-2.7, -1.2, -0.4, 0.3, 1.6, 2.2}) {
        int const p = bragg_partner(q);
        CHECK(bragg_partner(q + p) == -p);
    }
    PulseParams pulse{2.0e5, 0.0, 8e-6};
    double const recoil = 1.6e6;
    for (double q = -3.0; q <= 3.0; q += 0.173) {
        auto const a = two_level_bragg(pulse, q, recoil);
        REQUIRE(a.total_population() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("ladder integration")
{
    Fixture f;

    SUBCASE("unitarity over random parameters")
    {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> area(0.0, 8.0);
        std::uniform_real_distribution<double> q(-2.0, 2.0);
        std::uniform_real_distribution<double> sigma(0.3e-6, 3e-6);
        for (int i = 0; i < 12; ++i) {
            auto const a = integrate(f.problem(area(rng), q(rng), sigma(rng), 3));
            CHECK(std::abs(a.total_population() - 1.0) < 1e-9);
        }
    }

    SUBCASE("deep Bragg regime matches the two-level model")
    {
        double const recoil = recoil_frequency(f.wave, f.li7.mass_kg);
        for (double area : {c::pi / 2, c::pi, 0.7 * c::pi}) {
            auto const pr = f.problem(area, -0.5, 10e-6);
            CHECK(2.0 * recoil / pr.rabi_peak_rad_s > 20.0);
            auto const ladder = integrate(pr);
            auto const two = two_level_bragg(PulseParams{area, 0.0, 1.0});
            CHECK(std::abs(ladder.population(0) - two.population(0)) < 1e-3);
            CHECK(std::abs(ladder.population(1) - two.population(1)) < 1e-3);
        }
    }

    SUBCASE("Raman-Nath limit follows Bessel functions")
    {
        for (double phi : {0.8, 1.5, 2.4}) {
            auto pr = f.problem(phi, 0.0, 2e-9, 10);
            auto const a = ladder_integrate(pr, pr.envelope_sigma_s / 40.0);
            for (int p = -3; p <= 3; ++p) {
                double const j = std::cyl_bessel_j(std::abs(p), phi);
                CHECK(std::abs(a.population(p) - j * j) < 1e-3);
            }
            CHECK(std::abs(a.population(-1) - a.population(1)) < 1e-9);
        }
    }

    SUBCASE("reflection symmetry swaps p and -p")
    {
        for (double q : {0.2, 0.5, 0.9, 1.3}) {
            auto const a = integrate(f.problem(2.0, q, 1e-6, 3));
            auto const b = integrate(f.problem(2.0, -q, 1e-6, 3));
            for (int p = -3; p <= 3; ++p)
                CHECK(std::abs(a.population(p) - b.population(-p)) < 1e-9);
        }
    }

    SUBCASE("two-level limit leakage")
    {
        auto const pr = f.problem(c::pi, -0.5);
        CHECK(2.0 * pr.recoil_rad_s / pr.rabi_peak_rad_s > 5.0);
        auto const a = integrate(pr);
        double leak = 0;
        for (int p = -4; p <= 4; ++p)
            if (p != 0 && p != 1)
                leak += a.population(p);
        CHECK(leak < 1e-3);
    }

    SUBCASE("truncation self-consistency")
    {
        auto const a = integrate(f.problem(c::pi, -0.5, 3.1e-6, 4));
        auto const b = integrate(f.problem(c::pi, -0.5, 3.1e-6, 8));
        for (int p = -4; p <= 4; ++p)
            CHECK(std::abs(a.population(p) - b.population(p)) < 1e-6);
    }

    SUBCASE("preconditions")
    {
        auto const pr = f.problem(c::pi, -0.5);
        CHECK_THROWS_AS(ladder_integrate(pr, 2.0 * pr.max_step()), UnstableStepError);
        auto small = pr;
        small.p_max = 1;
        CHECK_THROWS(ladder_integrate(small, 1e-9));
    }
}

TEST_CASE("order -1 suppression")
{
    Fixture f;
    f.wave.coupling_scale = c::pi / pulse_params(f.wave, f.atom).area();
    CHECK(order_minus_one_suppression(f.wave, f.atom) < 1e-3);

    auto at = [&](double theta_y) {
        auto w = f.wave;
        w.theta_y_rad = theta_y;
        double const dt = 0.99 * ladder_problem(w, f.atom, 4).max_step();
        return ladder_integrate(w, f.atom, 4, dt);
    };
    double const tb = f.theta_b();
    auto const plus = at(tb);
    auto const minus = at(-tb);
    CHECK(plus.population(1) > 0.9);
    CHECK(plus.population(-1) < 1e-3);
    CHECK(minus.population(-1) > 0.9);
    CHECK(minus.population(1) < 1e-3);
    CHECK(minus.population(-1) == doctest::Approx(plus.population(1)).epsilon(1e-6));
    for (double th : {-2.0 * tb, -0.5 * tb, 0.0})
        CHECK(at(th).population(-1) < minus.population(-1));
}
