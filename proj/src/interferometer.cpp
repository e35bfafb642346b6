#include "atomint/interferometer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "atomint/constants.hpp"
#include "atomint/errors.hpp"
#include "atomint/random.hpp"
#include "parallel.hpp"

namespace atomint {

namespace c = constants;

std::string to_string(BraggModel m)
{
    return m == BraggModel::ladder ? "ladder" : "two-level";
}

BraggModel parse_bragg_model(std::string const& s)
{
    if (s == "two-level")
        return BraggModel::two_level;
    if (s == "ladder")
        return BraggModel::ladder;
    throw ConfigError(fmt::format("unknown Bragg model '{}' (expected two-level or ladder)", s));
}

std::string to_string(SweepVariable v)
{
    switch (v) {
        case SweepVariable::mirror1_x: return "x_m1_m";
        case SweepVariable::mirror2_x: return "x_m2_m";
        case SweepVariable::mirror3_x: return "x_m3_m";
        case SweepVariable::time: return "time_s";
        case SweepVariable::detector_slit_x: return "detector_slit_x_m";
    }
    return "unknown";
}

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//

void InterferometerConfig::validate() const
{
    validate_species(species);
    source.validate();
    geometry.validate();
    for (auto const& w : waves)
        w.validate();
    auto const& z = geometry.mirror_z_m;
    double const asym = (z[1] - z[0]) - (z[2] - z[1]);
    if (std::abs(asym) > spacing_tolerance_m)
        throw ConfigError(fmt::format(
            "grating spacings differ by {:.3e} m, more than the tolerance {:.3e} m", asym,
            spacing_tolerance_m));
    if (detector_port != 1 && detector_port != 2)
        throw ConfigError("detector port must be 1 or 2");
    if (std::find(orders.begin(), orders.end(), 0) == orders.end()
        || std::find(orders.begin(), orders.end(), 1) == orders.end())
        throw ConfigError("diffraction order set must contain 0 and 1");
    if (ladder_p_max < 2)
        throw ConfigError("ladder p_max must be at least 2");
    if (!(phase_dispersion_rad >= 0))
        throw ConfigError("phase dispersion must be non-negative");
    if (!(coherence_width_m > 0))
        throw ConfigError("coherence width must be positive");
    (void)reference_species();
}

const Species& InterferometerConfig::reference_species() const
{
    for (auto const& s : species)
        if (s.diffracted)
            return s;
    throw ConfigError("no diffracted species configured");
}

double InterferometerConfig::nominal_diffraction_angle() const
{
    return diffraction_angle(de_broglie(reference_species().mass_kg, source.mean_speed_m_s),
                             waves[0].period());
}

double InterferometerConfig::port_centroid(int port) const
{
    PathTemplate main;
    main.orders = port == 1 ? std::array<int, 3>{1, -1, 0} : std::array<int, 3>{1, -1, 1};
    return nominal_diffraction_angle()
           * main.offset_factor(geometry.detector_slit_z_m, geometry.mirror_z_m);
}

double calibrated_coupling_scale(const StandingWave& wave, const Species& species,
                                 const HyperfineLevel& level, double speed_m_s, double area)
{
    StandingWave unit = wave;
    unit.coupling_scale = 1.0;
    double const rabi = effective_rabi(unit, species, level);
    if (!(rabi > 0))
        throw DomainError("calibrated_coupling_scale: wave has no coupling to calibrate");
    double const tau = std::sqrt(c::pi / 2.0) * wave.waist_m / speed_m_s;
    return area / (rabi * tau);
}

InterferometerConfig default_interferometer()
{
    InterferometerConfig cfg;
    cfg.species = natural_lithium();
    cfg.source = default_beam_source();
    auto const& li7 = cfg.species.front();
    double const powers[3] = {0.040, 0.080, 0.040};
    double const theta_b =
        bragg_angle(de_broglie(li7.mass_kg, cfg.source.mean_speed_m_s), li7.grating_period());
    for (std::size_t j = 0; j < 3; ++j) {
        cfg.waves[j] = make_standing_wave(li7, powers[j]);
        cfg.waves[j].theta_y_rad = theta_b;
    }
    double const scale = calibrated_coupling_scale(cfg.waves[1], li7, li7.levels.back(),
                                                   cfg.source.mean_speed_m_s, c::pi);
    for (auto& w : cfg.waves)
        w.coupling_scale = scale;
    cfg.coherence_width_m =
        de_broglie(li7.mass_kg, cfg.source.mean_speed_m_s)
        * (cfg.geometry.detector_slit_z_m - cfg.geometry.slit1_z_m) / cfg.geometry.slit1_width_m;
    return cfg;
}

//---------------------------------------------------------------------------//
// Paths
//---------------------------------------------------------------------------//

double PathTemplate::offset_factor(double z, std::array<double, 3> const& grating_z) const
{
    double off = 0;
    for (std::size_t j = 0; j < 3; ++j)
        if (grating_z[j] < z)
            off += orders[j] * (z - grating_z[j]);
    return off;
}

std::vector<PathTemplate> enumerate_paths(std::span<const int> orders,
                                          std::array<double, 3> nominal_q)
{
    std::vector<PathTemplate> out;
    out.reserve(orders.size() * orders.size() * orders.size());
    for (int r1 : orders)
        for (int r2 : orders)
            for (int r3 : orders) {
                PathTemplate t;
                std::array<int, 3> const rel{r1, r2, r3};
                int net = 0;
                for (std::size_t j = 0; j < 3; ++j) {
                    double const q = nominal_q[j] + net;
                    t.orders[j] = rel[j] * bragg_partner(q);
                    net += t.orders[j];
                }
                t.net_order = net;
                if (t.orders == std::array<int, 3>{1, -1, 0}
                    || t.orders == std::array<int, 3>{0, 1, -1})
                    t.port = PortLabel::port1;
                else if (t.orders == std::array<int, 3>{1, -1, 1}
                         || t.orders == std::array<int, 3>{0, 1, 0})
                    t.port = PortLabel::port2;
                out.push_back(t);
            }
    return out;
}

namespace {

// Amplitudes of one grating for one incident momentum, cached per path prefix.
class GratingCache
{
  public:
    GratingCache(const InterferometerConfig& cfg, const AtomSample& atom)
        : cfg_(cfg), atom_(atom)
    {
    }

    const DiffractionAmplitudes& get(std::size_t j, int n_before, double q)
    {
        auto key = std::make_pair(static_cast<int>(j), n_before);
        auto it = cache_.find(key);
        if (it != cache_.end())
            return it->second;
        return cache_.emplace(key, compute(j, q)).first->second;
    }

  private:
    DiffractionAmplitudes compute(std::size_t j, double q) const
    {
        auto const& wave = cfg_.waves[j];
        if (!atom_.species->diffracted || wave.power_w == 0.0)
            return DiffractionAmplitudes(0, {Complex{1.0, 0.0}});
        if (cfg_.model == BraggModel::two_level) {
            auto const pulse = pulse_params(wave, atom_);
            return two_level_bragg(pulse, q, recoil_frequency(wave, atom_.species->mass_kg));
        }
        auto pr = ladder_problem(wave, atom_, cfg_.ladder_p_max);
        pr.incident_q = q;
        return ladder_integrate(pr, 0.99 * pr.max_step());
    }

    const InterferometerConfig& cfg_;
    const AtomSample& atom_;
    std::map<std::pair<int, int>, DiffractionAmplitudes> cache_;
};

double loss_factor(const InterferometerConfig& cfg, const AtomSample& atom, std::size_t j)
{
    if (!atom.species->diffracted || cfg.waves[j].power_w == 0.0)
        return 1.0;
    return std::sqrt(1.0 - cfg.waves[j].loss_probability);
}

}  // namespace

std::vector<PathState> trace_paths(const InterferometerConfig& config,
                                   std::span<const PathTemplate> templates,
                                   const AtomSample& atom, double extra_phase_rad)
{
    auto const& geom = config.geometry;
    double const mass = atom.species->mass_kg;
    double const v = atom.speed_m_s;
    double const k_atom = mass * v / c::hbar;
    GratingCache cache(config, atom);

    std::vector<PathState> out;
    out.reserve(templates.size());
    for (auto const& t : templates) {
        Complex amp{1.0, 0.0};
        double theta = atom.angle_rad;
        double x = atom.x_at(geom.mirror_z_m[0], geom);
        double z_prev = geom.mirror_z_m[0];
        double free_phase = 0.0;
        int n_before = 0;
        bool blocked = false;
        for (std::size_t j = 0; j < 3 && !blocked; ++j) {
            double const dz = geom.mirror_z_m[j] - z_prev;
            x += theta * dz;
            free_phase -= 0.5 * k_atom * theta * theta * dz;
            z_prev = geom.mirror_z_m[j];
            int const p = t.orders[j];
            if (!config.active[j]) {
                blocked = p != 0;
                continue;
            }
            auto const& wave = config.waves[j];
            double const q = incident_momentum(wave, mass, v, theta);
            auto const& amps = cache.get(j, n_before, q);
            double laser_phase = wave.grating_k_rad_m
                                 * (wave.mirror_x_m + wave.theta_z_rad * atom.height_m);
            if (j == 2)
                laser_phase += extra_phase_rad;
            amp *= amps[p] * std::polar(loss_factor(config, atom, j), -p * laser_phase);
            theta += p * c::hbar * wave.grating_k_rad_m / (mass * v);
            n_before += p;
        }
        if (blocked)
            continue;
        double const dz = geom.detector_slit_z_m - z_prev;
        x += theta * dz;
        free_phase -= 0.5 * k_atom * theta * theta * dz;
        PathState s;
        s.path = t;
        s.amplitude = amp * std::polar(1.0, free_phase);
        s.exit_angle_rad = theta;
        s.exit_x_m = x;
        out.push_back(s);
    }
    return out;
}

PortProbabilities port_probabilities(const InterferometerConfig& config, const AtomSample& atom)
{
    auto const templates = enumerate_paths(config.orders);
    auto const states = trace_paths(config, templates, atom);
    PortProbabilities out;
    Complex port1{}, port2{};
    std::map<int, Complex> by_momentum;
    for (auto const& s : states) {
        by_momentum[s.path.net_order] += s.amplitude;
        switch (s.path.port) {
            case PortLabel::port1: port1 += s.amplitude; break;
            case PortLabel::port2: port2 += s.amplitude; break;
            case PortLabel::stray: out.stray += std::norm(s.amplitude); break;
        }
    }
    out.port1 = std::norm(port1);
    out.port2 = std::norm(port2);
    for (auto const& [n, a] : by_momentum)
        out.coherent_total += std::norm(a);
    double survive = 1.0;
    for (std::size_t j = 0; j < 3; ++j)
        if (config.active[j])
            survive *= std::pow(loss_factor(config, atom, j), 2);
    out.lost = 1.0 - survive;
    return out;
}

double mirror_phase(double x_m1, double x_m2, double x_m3, double period_m)
{
    if (!(period_m > 0))
        throw DomainError("mirror_phase: period must be positive");
    return c::two_pi * (x_m1 + x_m3 - 2.0 * x_m2) / period_m;
}

std::pair<double, double> port_intensity(double phase_rad, double contrast)
{
    if (!(contrast >= 0 && contrast <= 1))
        throw DomainError("port_intensity: contrast must lie in [0, 1]");
    double const f = contrast * std::cos(phase_rad);
    return {1.0 + f, 1.0 - f};
}

double delta_k_washout(std::array<double, 3> const& theta_z_rad, double aperture_height_m,
                       double grating_k_rad_m)
{
    if (!(aperture_height_m > 0))
        throw DomainError("delta_k_washout: aperture height must be positive");
    double const dk = grating_k_rad_m * (theta_z_rad[0] + theta_z_rad[2] - 2.0 * theta_z_rad[1]);
    double const arg = 0.5 * dk * aperture_height_m;
    if (arg == 0.0)
        return 1.0;
    return std::abs(std::sin(arg) / arg);
}

double phase_dispersion_contrast(double sigma_rad)
{
    if (!(sigma_rad >= 0))
        throw DomainError("phase_dispersion_contrast: sigma must be non-negative");
    return std::exp(-0.5 * sigma_rad * sigma_rad);
}

//---------------------------------------------------------------------------//
// Monte Carlo fringe model
//---------------------------------------------------------------------------//

double PortModel::rate(double dphi) const
{
    return static_rate_hz + std::real(harmonic_hz * std::polar(1.0, dphi));
}

double PortModel::contrast() const
{
    return static_rate_hz > 0 ? std::abs(harmonic_hz) / static_rate_hz : 0.0;
}

namespace {

template<class Get>
double batch_error(std::vector<std::array<PortModel, 2>> const& batches, Get&& get)
{
    if (batches.size() < 2)
        return 0.0;
    double mean = 0;
    for (auto const& b : batches)
        mean += get(b);
    mean /= static_cast<double>(batches.size());
    double var = 0;
    for (auto const& b : batches)
        var += (get(b) - mean) * (get(b) - mean);
    var /= static_cast<double>(batches.size() - 1);
    return std::sqrt(var / static_cast<double>(batches.size()));
}

bool is_interferometer_pair(std::array<int, 3> const& d)
{
    return d == std::array<int, 3>{1, -2, 1};
}

// Adds the slit-accepted signal of one atom to `port`.
void accumulate_port(std::vector<PathState> const& states, double slit_x, double half_width,
                     double coherence_width, PortModel& port)
{
    std::vector<PathState const*> accepted;
    for (auto const& s : states)
        if (std::abs(s.exit_x_m - slit_x) <= half_width)
            accepted.push_back(&s);
    std::sort(accepted.begin(), accepted.end(), [](auto a, auto b) {
        if (a->path.net_order != b->path.net_order)
            return a->path.net_order < b->path.net_order;
        return a->exit_x_m < b->exit_x_m;
    });
    std::size_t begin = 0;
    while (begin < accepted.size()) {
        std::size_t end = begin + 1;
        while (end < accepted.size()
               && accepted[end]->path.net_order == accepted[begin]->path.net_order
               && accepted[end]->exit_x_m - accepted[end - 1]->exit_x_m <= coherence_width)
            ++end;
        for (std::size_t i = begin; i < end; ++i) {
            Complex const ai = accepted[i]->amplitude;
            port.static_rate_hz += std::norm(ai);
            for (std::size_t k = i + 1; k < end; ++k) {
                Complex const cross = 2.0 * ai * std::conj(accepted[k]->amplitude);
                std::array<int, 3> d{};
                std::array<int, 3> neg{};
                for (std::size_t j = 0; j < 3; ++j) {
                    d[j] = accepted[i]->path.orders[j] - accepted[k]->path.orders[j];
                    neg[j] = -d[j];
                }
                if (is_interferometer_pair(d))
                    port.harmonic_hz += std::conj(cross);
                else if (is_interferometer_pair(neg))
                    port.harmonic_hz += cross;
                else
                    port.static_rate_hz += std::real(cross);
            }
        }
        begin = end;
    }
}

struct AtomContribution
{
    std::array<PortModel, 2> ports;
    double first_order = 0.0;
};

}  // namespace

double FringeModel::contrast_error(int p) const
{
    auto const idx = static_cast<std::size_t>(p - 1);
    return batch_error(batches, [idx](auto const& b) { return b[idx].contrast(); });
}

double FringeModel::first_order_error() const
{
    std::size_t const n = first_order_batches.size();
    if (n < 2)
        return 0.0;
    double const mean =
        std::accumulate(first_order_batches.begin(), first_order_batches.end(), 0.0)
        / static_cast<double>(n);
    double var = 0;
    for (double v : first_order_batches)
        var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n));
}

double FringeModel::rate_error(int p) const
{
    auto const idx = static_cast<std::size_t>(p - 1);
    return batch_error(batches, [idx](auto const& b) { return b[idx].static_rate_hz; });
}

FringeModel fringe_model(const InterferometerConfig& config, std::size_t n_samples,
                         std::uint64_t seed, unsigned threads)
{
    config.validate();
    if (std::none_of(config.active.begin(), config.active.end(), [](bool a) { return a; }))
        throw ConfigError("fringe_model: no active gratings");
    if (n_samples == 0)
        throw ConfigError("fringe_model: sample count must be positive");

    auto templates = enumerate_paths(config.orders);
    if (!config.include_strays)
        std::erase_if(templates, [](auto const& t) { return t.port == PortLabel::stray; });

    std::size_t first_active = 0;
    while (!config.active[first_active])
        ++first_active;

    double const half_width = 0.5 * config.geometry.detector_slit_width_m;
    std::array<double, 2> const slit{config.port_centroid(1) + config.detector_slit_offset_m,
                                     config.port_centroid(2) + config.detector_slit_offset_m};

    std::vector<AtomContribution> per_atom(n_samples);
    detail::parallel_for(n_samples, threads, [&](std::size_t i) {
        Rng rng = make_substream(seed, i);
        AtomSample const atom =
            sample_atom(config.source, config.geometry, config.species, rng);
        double jitter = 0.0;
        if (config.phase_dispersion_rad > 0) {
            std::normal_distribution<double> gauss(0.0, config.phase_dispersion_rad);
            jitter = gauss(rng);
        }
        auto const states = trace_paths(config, templates, atom, jitter);
        auto& out = per_atom[i];
        for (std::size_t k = 0; k < 2; ++k)
            accumulate_port(states, slit[k], half_width, config.coherence_width_m, out.ports[k]);

        GratingCache cache(config, atom);
        auto const& wave = config.waves[first_active];
        double const q = incident_momentum(wave, atom.species->mass_kg, atom.speed_m_s,
                                           atom.angle_rad);
        out.first_order = cache.get(first_active, 0, q).population(1);
    });

    FringeModel model;
    model.samples = n_samples;
    std::size_t const n_batches = std::min<std::size_t>(16, n_samples);
    model.batches.assign(n_batches, {});
    model.first_order_batches.assign(n_batches, 0.0);
    std::vector<std::size_t> batch_count(n_batches, 0);
    double const flux = config.source.flux_hz;
    for (std::size_t i = 0; i < n_samples; ++i) {
        std::size_t const b = i * n_batches / n_samples;
        for (std::size_t k = 0; k < 2; ++k) {
            auto const& pm = per_atom[i].ports[k];
            model.ports[k].static_rate_hz += pm.static_rate_hz;
            model.ports[k].harmonic_hz += pm.harmonic_hz;
            model.batches[b][k].static_rate_hz += pm.static_rate_hz;
            model.batches[b][k].harmonic_hz += pm.harmonic_hz;
        }
        model.first_order_efficiency += per_atom[i].first_order;
        model.first_order_batches[b] += per_atom[i].first_order;
        ++batch_count[b];
    }
    double const norm = flux / static_cast<double>(n_samples);
    for (auto& p : model.ports) {
        p.static_rate_hz *= norm;
        p.harmonic_hz *= norm;
    }
    for (std::size_t b = 0; b < n_batches; ++b) {
        double const bn = flux / static_cast<double>(batch_count[b]);
        for (auto& p : model.batches[b]) {
            p.static_rate_hz *= bn;
            p.harmonic_hz *= bn;
        }
    }
    model.first_order_efficiency /= static_cast<double>(n_samples);
    for (std::size_t b = 0; b < n_batches; ++b)
        model.first_order_batches[b] /= static_cast<double>(batch_count[b]);
    return model;
}

std::vector<FringePoint> FringeScan::port(int p) const
{
    std::vector<FringePoint> out;
    for (auto const& pt : points)
        if (pt.port == p)
            out.push_back(pt);
    return out;
}

double sweep_phase(const InterferometerConfig& config, const Sweep& sweep, double value)
{
    auto const& w = config.waves;
    switch (sweep.variable) {
        case SweepVariable::mirror1_x:
            return w[0].grating_k_rad_m * (value - w[0].mirror_x_m);
        case SweepVariable::mirror2_x:
            return -2.0 * w[1].grating_k_rad_m * (value - w[1].mirror_x_m);
        case SweepVariable::mirror3_x:
            return w[2].grating_k_rad_m * (value - w[2].mirror_x_m);
        case SweepVariable::time:
            return w[2].grating_k_rad_m
                   * (sweep.piezo_rate_m_s * value + sweep.piezo_quadratic_m_s2 * value * value);
        case SweepVariable::detector_slit_x:
            break;
    }
    throw ConfigError("sweep variable does not act on the interferometer phase");
}

FringeScan evaluate_sweep(const InterferometerConfig& config, const FringeModel& model,
                          const Sweep& sweep, double bin_s)
{
    FringeScan scan;
    scan.variable = to_string(sweep.variable);
    scan.bin_s = bin_s;
    for (double value : sweep.values) {
        double const dphi = sweep_phase(config, sweep, value);
        for (int port = 1; port <= 2; ++port) {
            auto const& pm = model.port(port);
            FringePoint pt;
            pt.sweep_value = value;
            pt.port = port;
            pt.static_rate_hz = pm.static_rate_hz;
            pt.interference_hz = pm.harmonic_hz * std::polar(1.0, dphi);
            pt.expected_rate_hz = std::max(0.0, pt.static_rate_hz + std::real(pt.interference_hz));
            scan.points.push_back(pt);
        }
    }
    return scan;
}

FringeScan monte_carlo_fringe(const InterferometerConfig& config, const Sweep& sweep,
                              std::size_t n_samples, std::uint64_t seed, unsigned threads,
                              double bin_s)
{
    // Common random numbers: the same atoms are used at every sweep value,
    // and the mirror phases enter each atom's signal analytically.
    auto const model = fringe_model(config, n_samples, seed, threads);
    return evaluate_sweep(config, model, sweep, bin_s);
}

//---------------------------------------------------------------------------//
// Single-grating diffraction profile
//---------------------------------------------------------------------------//

DiffractionProfile diffraction_profile(const InterferometerConfig& config,
                                       std::span<const double> slit_x_m, std::size_t n_samples,
                                       std::uint64_t seed, unsigned threads, double bin_s)
{
    config.validate();
    if (std::count(config.active.begin(), config.active.end(), true) != 1)
        throw ConfigError("diffraction_profile: exactly one grating must be active");
    if (n_samples == 0)
        throw ConfigError("diffraction_profile: sample count must be positive");
    std::size_t const j = static_cast<std::size_t>(
        std::find(config.active.begin(), config.active.end(), true) - config.active.begin());
    auto const& geom = config.geometry;
    auto const& wave = config.waves[j];

    struct Beam
    {
        int order;
        double x;
        double population;
        double survive;
    };
    std::vector<std::vector<Beam>> per_atom(n_samples);
    detail::parallel_for(n_samples, threads, [&](std::size_t i) {
        Rng rng = make_substream(seed, i);
        AtomSample const atom = sample_atom(config.source, geom, config.species, rng);
        double const mass = atom.species->mass_kg;
        double const q = incident_momentum(wave, mass, atom.speed_m_s, atom.angle_rad);
        GratingCache cache(config, atom);
        auto const& amps = cache.get(j, 0, q);
        double const survive = std::pow(loss_factor(config, atom, j), 2);
        double const theta1 = c::hbar * wave.grating_k_rad_m / (mass * atom.speed_m_s);
        double const x0 = atom.x_at(geom.detector_slit_z_m, geom);
        for (int p = amps.min_order(); p <= amps.max_order(); ++p) {
            per_atom[i].push_back(
                {p, x0 + p * theta1 * (geom.detector_slit_z_m - geom.mirror_z_m[j]),
                 amps.population(p), survive});
        }
    });

    DiffractionProfile out;
    out.scan.variable = to_string(SweepVariable::detector_slit_x);
    out.scan.bin_s = bin_s;
    out.order_separation_m =
        config.nominal_diffraction_angle() * (geom.detector_slit_z_m - geom.mirror_z_m[j]);
    double const half = 0.5 * geom.detector_slit_width_m;
    double const norm = config.source.flux_hz / static_cast<double>(n_samples);
    std::vector<double> rate(slit_x_m.size(), 0.0);
    for (auto const& beams : per_atom) {
        for (auto const& b : beams) {
            out.order_population[b.order] += b.population;
            for (std::size_t s = 0; s < slit_x_m.size(); ++s)
                if (std::abs(b.x - slit_x_m[s]) <= half)
                    rate[s] += b.population * b.survive;
        }
    }
    for (auto& [p, pop] : out.order_population)
        pop /= static_cast<double>(n_samples);
    for (std::size_t s = 0; s < slit_x_m.size(); ++s) {
        FringePoint pt;
        pt.sweep_value = slit_x_m[s];
        pt.port = 0;
        pt.static_rate_hz = rate[s] * norm;
        pt.expected_rate_hz = pt.static_rate_hz;
        out.scan.points.push_back(pt);
    }
    return out;
}

}  // namespace atomint
