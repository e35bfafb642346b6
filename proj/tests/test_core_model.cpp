#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "atomint/constants.hpp"
#include "atomint/core_model.hpp"
#include "atomint/errors.hpp"

using namespace atomint;
namespace c = atomint::constants;

namespace {

double rel(double a, double b)
{
    return std::abs(a - b) / std::abs(b);
}

}  // namespace

TEST_CASE("de Broglie wavelength")
{
    double const li7 = natural_lithium().front().mass_kg;
    CHECK(rel(de_broglie(li7, 1050.0), 54.3e-12) < 5e-3);
    CHECK(rel(de_broglie(7.0 * c::atomic_mass_unit, 1050.0), 54.3e-12) < 5e-3);
    CHECK(de_broglie(li7, 2100.0) == doctest::Approx(0.5 * de_broglie(li7, 1050.0)).epsilon(1e-14));
    CHECK(rel(de_broglie(23.0 * c::atomic_mass_unit, 1000.0), 17.3e-12) < 5e-3);
    CHECK_THROWS_AS(de_broglie(0.0, 1000.0), DomainError);
    CHECK_THROWS_AS(de_broglie(li7, -1.0), DomainError);
}

TEST_CASE("diffraction and Bragg angles")
{
    CHECK(rel(diffraction_angle(54.3e-12, 335e-9), 162e-6) < 5e-3);
    CHECK(diffraction_angle(335e-9, 335e-9) == 1.0);
    CHECK(bragg_angle(54.3e-12, 335e-9) == doctest::Approx(81e-6).epsilon(5e-3));
    CHECK_THROWS_AS(diffraction_angle(54e-12, 0.0), DomainError);
    CHECK_THROWS_AS(diffraction_angle(54e-12, -1e-9), DomainError);

    auto const sp = natural_lithium().front();
    double prev = 1.0;
    for (double v = 500; v <= 2000; v += 50) {
        double const th = diffraction_angle(de_broglie(sp.mass_kg, v), sp.grating_period());
        CHECK(th < prev);
        prev = th;
    }
}

TEST_CASE("supersonic terminal velocity")
{
    double const ar = c::argon_mass;
    CHECK(rel(supersonic_terminal_velocity(1050.0, ar), 1045.0) < 1e-2);
    CHECK(supersonic_terminal_velocity(4200.0, ar)
          == doctest::Approx(2.0 * supersonic_terminal_velocity(1050.0, ar)).epsilon(1e-14));
    CHECK(rel(supersonic_terminal_velocity(1050.0, 4.0 * ar), 522.0) < 5e-3);
    CHECK_THROWS_AS(supersonic_terminal_velocity(0.0, ar), DomainError);
    CHECK_THROWS_AS(supersonic_terminal_velocity(1050.0, 0.0), DomainError);
}

TEST_CASE("lithium species data")
{
    auto const li = natural_lithium();
    REQUIRE(li.size() == 2);
    CHECK_NOTHROW(validate_species(li));
    auto const& li7 = li.front();
    CHECK(li7.abundance == doctest::Approx(0.926));
    CHECK(rel(li7.grating_period(), 335e-9) < 2e-3);
    REQUIRE(li7.levels.size() == 2);
    for (auto const& l : li7.levels) {
        CHECK(l.degeneracy == 2 * l.f + 1);
        CHECK(std::abs(l.detuning_rad_s) > 100.0 * li7.linewidth_rad_s);
    }
    CHECK(li7.levels[0].detuning_rad_s == doctest::Approx(c::two_pi * 2.1e9));
    CHECK(li7.levels[1].detuning_rad_s == doctest::Approx(c::two_pi * 2.9e9));
    CHECK_FALSE(li.back().diffracted);

    auto bad = li;
    bad[0].abundance = 0.9;
    CHECK_THROWS_AS(validate_species(bad), ConfigError);
    bad = li;
    bad[0].mass_kg = 0.0;
    CHECK_THROWS_AS(validate_species(bad), ConfigError);
    CHECK_THROWS_AS(validate_species(std::vector<Species>{}), ConfigError);
}

TEST_CASE("geometry validation")
{
    CollimationGeometry g;
    CHECK_NOTHROW(g.validate());
    auto bad = g;
    bad.slit1_z_m = bad.slit0_z_m;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = g;
    bad.mirror_z_m[1] = bad.mirror_z_m[0] - 0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = g;
    bad.detector_slit_width_m = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    BeamSource s = default_beam_source();
    CHECK_NOTHROW(s.validate());
    s.speed_ratio = 1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("angular acceptance against a brute-force ray trace")
{
    CollimationGeometry g;
    CHECK(g.angular_acceptance() == doctest::Approx(41e-6).epsilon(0.01));

    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> pos(-30e-6, 30e-6);
    std::uniform_real_distribution<double> ang(-60e-6, 60e-6);
    double lo = 1, hi = -1;
    double const L = g.slit1_z_m - g.slit0_z_m;
    for (int i = 0; i < 1'000'000; ++i) {
        double const x0 = pos(rng);
        double const th = ang(rng);
        if (std::abs(x0) > 0.5 * g.slit0_width_m)
            continue;
        if (std::abs(x0 + th * L) > 0.5 * g.slit1_width_m)
            continue;
        lo = std::min(lo, th);
        hi = std::max(hi, th);
    }
    CHECK(rel(hi - lo, g.angular_acceptance()) < 0.03);
}

TEST_CASE("sample_atom")
{
    auto const species = natural_lithium();
    auto const source = default_beam_source();
    CollimationGeometry g;

    SUBCASE("errors")
    {
        Rng rng(1);
        CHECK_THROWS_AS(sample_atom(source, g, std::vector<Species>{}, rng), ConfigError);
        auto bad = g;
        bad.slit1_z_m = bad.slit0_z_m;
        CHECK_THROWS_AS(sample_atom(source, bad, species, rng), ConfigError);
    }

    SUBCASE("trajectories pass both slits and statistics converge")
    {
        constexpr int n = 100'000;
        int n_li7 = 0, n_f2 = 0, n_li7_levels = 0;
        double sum_v = 0;
        for (int i = 0; i < n; ++i) {
            Rng rng = make_substream(42, static_cast<std::uint64_t>(i));
            auto const a = sample_atom(source, g, species, rng);
            REQUIRE(std::abs(a.x_at(g.slit0_z_m, g)) <= 0.5 * g.slit0_width_m * (1 + 1e-12));
            REQUIRE(std::abs(a.x_at(g.slit1_z_m, g)) <= 0.5 * g.slit1_width_m * (1 + 1e-12));
            REQUIRE(a.speed_m_s > 0);
            REQUIRE(a.weight > 0);
            REQUIRE(std::abs(a.height_m) <= 0.5 * g.aperture_height_m);
            sum_v += a.speed_m_s;
            if (a.species == &species[0]) {
                ++n_li7;
                ++n_li7_levels;
                if (a.level->f == 2)
                    ++n_f2;
            }
        }
        double const p = 0.926;
        CHECK(std::abs(n_li7 - p * n) < 3.0 * std::sqrt(n * p * (1 - p)));
        double const q = 5.0 / 8.0;
        CHECK(std::abs(n_f2 - q * n_li7_levels) < 3.0 * std::sqrt(n_li7_levels * q * (1 - q)));
        double const sigma_mean = source.speed_spread() / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(sum_v / n - source.mean_speed_m_s) < 5.0 * sigma_mean);
    }

    SUBCASE("identical seeds give identical streams")
    {
        Rng a(77), b(77);
        for (int i = 0; i < 100; ++i) {
            auto const x = sample_atom(source, g, species, a);
            auto const y = sample_atom(source, g, species, b);
            REQUIRE(x.speed_m_s == y.speed_m_s);
            REQUIRE(x.angle_rad == y.angle_rad);
            REQUIRE(x.offset_m == y.offset_m);
            REQUIRE(x.height_m == y.height_m);
            REQUIRE(x.species == y.species);
            REQUIRE(x.level == y.level);
        }
    }
}
