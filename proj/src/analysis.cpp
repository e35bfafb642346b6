#include "atomint/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <fmt/core.h>

#include "atomint/constants.hpp"
#include "atomint/errors.hpp"
#include "atomint/random.hpp"

namespace atomint {

namespace c = constants;

double FringeFit::phase(double t) const
{
    double const tau = t - t_ref_s;
    return phi0 + phi1 * tau + phi2 * tau * tau;
}

double FringeFit::rate(double t) const
{
    return background_hz + mean_rate_hz * (1.0 + contrast * std::cos(phase(t)));
}

//---------------------------------------------------------------------------//
// Fringe fit
//---------------------------------------------------------------------------//

namespace {

// Internal parameters: I, a, b, [phi1], [phi2], [B] with
// rate = B + I + a cos(psi) + b sin(psi), psi = phi1 tau + phi2 tau^2.
struct Layout
{
    bool phi1 = true;
    bool phi2 = true;
    bool background = false;

    int size() const { return 3 + phi1 + phi2 + background; }
    int i_phi1() const { return 3; }
    int i_phi2() const { return 3 + phi1; }
    int i_background() const { return 3 + phi1 + phi2; }
};

struct Problem
{
    std::vector<double> tau;
    std::vector<double> y;
    std::vector<bool> blocked;
    double bin = 0.0;
    Layout layout;
    double fixed_phi1 = 0.0;
    double fixed_background = 0.0;

    double phi1(Eigen::VectorXd const& p) const
    {
        return layout.phi1 ? p[layout.i_phi1()] : fixed_phi1;
    }
    double phi2(Eigen::VectorXd const& p) const { return layout.phi2 ? p[layout.i_phi2()] : 0.0; }
    double background(Eigen::VectorXd const& p) const
    {
        return layout.background ? p[layout.i_background()] : fixed_background;
    }

    double mean(Eigen::VectorXd const& p, std::size_t i) const
    {
        double const bkg = background(p);
        if (blocked[i])
            return bin * bkg;
        double const psi = phi1(p) * tau[i] + phi2(p) * tau[i] * tau[i];
        return bin * (bkg + p[0] + p[1] * std::cos(psi) + p[2] * std::sin(psi));
    }

    void jacobian_row(Eigen::VectorXd const& p, std::size_t i, Eigen::RowVectorXd& row) const
    {
        row.setZero();
        if (layout.background)
            row[layout.i_background()] = bin;
        if (blocked[i])
            return;
        double const t = tau[i];
        double const psi = phi1(p) * t + phi2(p) * t * t;
        double const cs = std::cos(psi), sn = std::sin(psi);
        double const dpsi = bin * (-p[1] * sn + p[2] * cs);
        row[0] = bin;
        row[1] = bin * cs;
        row[2] = bin * sn;
        if (layout.phi1)
            row[layout.i_phi1()] = dpsi * t;
        if (layout.phi2)
            row[layout.i_phi2()] = dpsi * t * t;
    }

    double chi_square(Eigen::VectorXd const& p, std::vector<double> const& var) const
    {
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            double const r = y[i] - mean(p, i);
            s += r * r / var[i];
        }
        return s;
    }

    std::vector<double> variances(Eigen::VectorXd const& p) const
    {
        std::vector<double> var(y.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            var[i] = std::max(mean(p, i), 1.0);
        return var;
    }
};

struct GridResult
{
    double phi1 = 0.0;
    double phi2 = 0.0;
    double sse = std::numeric_limits<double>::infinity();
    Eigen::Vector3d lin = Eigen::Vector3d::Zero();
};

// Linear least squares of (I, a, b) at fixed phase coefficients.
GridResult linear_at(Problem const& pr, double background, double phi1, double phi2)
{
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d aty = Eigen::Vector3d::Zero();
    double yy = 0;
    for (std::size_t i = 0; i < pr.y.size(); ++i) {
        if (pr.blocked[i])
            continue;
        double const t = pr.tau[i];
        double const psi = phi1 * t + phi2 * t * t;
        Eigen::Vector3d const row(1.0, std::cos(psi), std::sin(psi));
        double const v = pr.y[i] / pr.bin - background;
        ata += row * row.transpose();
        aty += row * v;
        yy += v * v;
    }
    GridResult g;
    g.phi1 = phi1;
    g.phi2 = phi2;
    g.lin = ata.ldlt().solve(aty);
    g.sse = yy - g.lin.dot(aty);
    return g;
}

struct LmOutcome
{
    Eigen::VectorXd p;
    double chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
};

LmOutcome levenberg_marquardt(Problem const& pr, Eigen::VectorXd p, std::vector<double> const& var,
                              int max_iterations)
{
    int const np = pr.layout.size();
    Eigen::RowVectorXd row(np);
    double lambda = 1e-3;
    double chi2 = pr.chi_square(p, var);
    LmOutcome out;
    for (int it = 0; it < max_iterations; ++it) {
        out.iterations = it + 1;
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(np, np);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(np);
        for (std::size_t i = 0; i < pr.y.size(); ++i) {
            pr.jacobian_row(p, i, row);
            double const w = 1.0 / var[i];
            a.noalias() += w * row.transpose() * row;
            g.noalias() += w * (pr.y[i] - pr.mean(p, i)) * row.transpose();
        }
        bool stepped = false;
        while (lambda < 1e12) {
            Eigen::MatrixXd damped = a;
            for (int k = 0; k < np; ++k)
                damped(k, k) += lambda * std::max(a(k, k), 1e-300);
            Eigen::VectorXd const delta = damped.ldlt().solve(g);
            Eigen::VectorXd const trial = p + delta;
            double const chi2_trial = pr.chi_square(trial, var);
            if (std::isfinite(chi2_trial) && chi2_trial <= chi2) {
                double const rel_step =
                    (delta.array().abs() / (p.array().abs() + 1e-12)).maxCoeff();
                double const drop = chi2 - chi2_trial;
                double const step_sigma = delta.dot(a * delta);
                p = trial;
                chi2 = chi2_trial;
                lambda = std::max(lambda * 0.1, 1e-12);
                stepped = true;
                if (rel_step < 1e-12 || step_sigma < 1e-8 || drop <= 1e-10 * (1.0 + chi2)
                    || (drop <= 1e-6 * (1.0 + chi2) && step_sigma < 1e-2)) {
                    out.converged = true;
                    out.p = p;
                    out.chi2 = chi2;
                    return out;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            // No downhill step at any damping: at a minimum to round-off.
            out.converged = true;
            break;
        }
    }
    out.p = p;
    out.chi2 = chi2;
    return out;
}

}  // namespace

FringeFit fit_fringes(std::span<const double> t_center_s, std::span<const double> counts,
                      double bin_s, const FitOptions& opts, std::span<const bool> beam_blocked)
{
    if (t_center_s.size() != counts.size())
        throw DomainError("fit_fringes: time and count arrays differ in length");
    if (!beam_blocked.empty() && beam_blocked.size() != counts.size())
        throw DomainError("fit_fringes: blocked-flag array has the wrong length");
    if (!(bin_s > 0))
        throw DomainError("fit_fringes: bin width must be positive");
    if (opts.fix_phase_rate && !opts.phase_rate_guess)
        throw DomainError("fit_fringes: a fixed phase rate needs a value");

    Problem pr;
    pr.bin = bin_s;
    pr.y.assign(counts.begin(), counts.end());
    pr.blocked.resize(counts.size());
    std::size_t n_on = 0, n_off = 0;
    double t_min = std::numeric_limits<double>::infinity();
    double t_max = -t_min;
    double off_sum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (!(counts[i] >= 0))
            throw DomainError("fit_fringes: counts must be non-negative");
        pr.blocked[i] = !beam_blocked.empty() && beam_blocked[i];
        if (pr.blocked[i]) {
            ++n_off;
            off_sum += counts[i];
        } else {
            ++n_on;
            t_min = std::min(t_min, t_center_s[i]);
            t_max = std::max(t_max, t_center_s[i]);
        }
    }
    if (n_on < 6)
        throw InsufficientDataError(
            fmt::format("fit_fringes: {} fringe bins, at least 6 are required", n_on));
    bool const fit_background = !opts.background_hz.has_value();
    if (fit_background && n_off == 0)
        throw InsufficientDataError(
            "fit_fringes: fitting the background needs beam-blocked bins");
    if (!fit_background && !(*opts.background_hz >= 0))
        throw DomainError("fit_fringes: background must be non-negative");

    double const t_ref = 0.5 * (t_min + t_max);
    pr.tau.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        pr.tau[i] = t_center_s[i] - t_ref;
    pr.layout.phi1 = !opts.fix_phase_rate;
    pr.layout.phi2 = opts.fit_quadratic;
    pr.layout.background = fit_background;
    pr.fixed_phi1 = opts.phase_rate_guess.value_or(0.0);
    double const b0 = fit_background ? off_sum / (static_cast<double>(n_off) * bin_s)
                                     : *opts.background_hz;
    pr.fixed_background = b0;

    // Coarse grid over the phase coefficients.
    double const span = t_max - t_min + bin_s;
    double const step1 = c::pi / (4.0 * span);
    std::vector<double> phi1_grid;
    if (opts.fix_phase_rate) {
        phi1_grid.push_back(*opts.phase_rate_guess);
    } else {
        double lo = 2.0 * c::pi / span;
        double hi = c::pi / bin_s;
        if (opts.phase_rate_guess) {
            double const g = *opts.phase_rate_guess;
            double const w = std::abs(g) * opts.phase_rate_window;
            lo = g - w;
            hi = g + w;
        }
        for (double f = lo; f <= hi + 0.5 * step1; f += step1)
            phi1_grid.push_back(f);
    }
    GridResult best;
    auto search = [&](double f2) {
        for (double f1 : phi1_grid) {
            auto const g = linear_at(pr, b0, f1, f2);
            if (g.sse < best.sse)
                best = g;
        }
    };
    search(0.0);
    if (opts.fit_quadratic) {
        // Extend the curvature grid while the optimum sits on its edge.
        double const step2 = c::pi / (span * span);
        int reach = 0;
        for (int round = 0; round < 8; ++round) {
            int const next = reach + 6;
            for (int k = reach + 1; k <= next; ++k) {
                search(k * step2);
                search(-k * step2);
            }
            reach = next;
            if (std::abs(best.phi2) < (reach - 0.5) * step2)
                break;
        }
    }

    Eigen::VectorXd p(pr.layout.size());
    p[0] = best.lin[0];
    p[1] = best.lin[1];
    p[2] = best.lin[2];
    if (pr.layout.phi1)
        p[pr.layout.i_phi1()] = best.phi1;
    if (pr.layout.phi2)
        p[pr.layout.i_phi2()] = best.phi2;
    if (pr.layout.background)
        p[pr.layout.i_background()] = b0;

    // Iteratively reweighted: variances from the current model.
    LmOutcome lm;
    int total_iterations = 0;
    std::vector<double> var;
    for (int outer = 0; outer < 4; ++outer) {
        var = pr.variances(p);
        lm = levenberg_marquardt(pr, p, var, opts.max_iterations);
        total_iterations += lm.iterations;
        if (!lm.converged || !lm.p.allFinite())
            throw ConvergenceError(fmt::format(
                "fit_fringes: no convergence after {} iterations; best grid point phi1 = {:.6g} "
                "rad/s, phi2 = {:.6g} rad/s^2",
                total_iterations, best.phi1, best.phi2));
        double const change =
            ((lm.p - p).array().abs() / (p.array().abs() + 1e-12)).maxCoeff();
        p = lm.p;
        if (change < 1e-9)
            break;
    }
    var = pr.variances(p);

    // Covariance from the weighted normal matrix.
    int const np = pr.layout.size();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(np, np);
    Eigen::RowVectorXd row(np);
    for (std::size_t i = 0; i < pr.y.size(); ++i) {
        pr.jacobian_row(p, i, row);
        a.noalias() += (1.0 / var[i]) * row.transpose() * row;
    }
    Eigen::MatrixXd const cov = a.completeOrthogonalDecomposition().pseudoInverse();

    FringeFit fit;
    double const mean = p[0];
    double const amp = std::hypot(p[1], p[2]);
    fit.mean_rate_hz = mean;
    fit.background_hz = pr.background(p);
    fit.background_fitted = fit_background;
    fit.contrast = mean != 0.0 ? amp / mean : 0.0;
    fit.phi0 = -std::atan2(p[2], p[1]);
    fit.phi1 = pr.phi1(p);
    fit.phi2 = pr.phi2(p);
    fit.t_ref_s = t_ref;

    auto var_of = [&](Eigen::VectorXd const& grad) {
        return std::sqrt(std::max(0.0, grad.dot(cov * grad)));
    };
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(np);
    grad[0] = 1.0;
    fit.mean_rate_err = var_of(grad);
    if (amp > 0 && mean != 0) {
        grad.setZero();
        grad[0] = -fit.contrast / mean;
        grad[1] = p[1] / (amp * mean);
        grad[2] = p[2] / (amp * mean);
        fit.contrast_err = var_of(grad);
        grad.setZero();
        grad[1] = p[2] / (amp * amp);
        grad[2] = -p[1] / (amp * amp);
        fit.phi0_err = var_of(grad);
    } else {
        // Amplitude at zero: the contrast error is the amplitude scale.
        fit.contrast_err = std::sqrt(std::max(0.0, 0.5 * (cov(1, 1) + cov(2, 2)))) / std::abs(mean);
        fit.phi0_err = c::pi;
    }
    if (pr.layout.phi1)
        fit.phi1_err = std::sqrt(std::max(0.0, cov(pr.layout.i_phi1(), pr.layout.i_phi1())));
    if (pr.layout.phi2)
        fit.phi2_err = std::sqrt(std::max(0.0, cov(pr.layout.i_phi2(), pr.layout.i_phi2())));
    if (pr.layout.background)
        fit.background_err =
            std::sqrt(std::max(0.0, cov(pr.layout.i_background(), pr.layout.i_background())));
    fit.chi_square = pr.chi_square(p, var);
    fit.dof = static_cast<int>(pr.y.size()) - np;
    fit.iterations = total_iterations;
    return fit;
}

FringeFit fit_fringes(const CountRecord& rec, const FitOptions& opts)
{
    std::vector<double> t(rec.size()), y(rec.size());
    for (std::size_t i = 0; i < rec.size(); ++i) {
        t[i] = rec.bin_center(i);
        y[i] = static_cast<double>(rec.counts[i]);
    }
    auto blocked = std::make_unique<bool[]>(rec.size());
    for (std::size_t i = 0; i < rec.size(); ++i)
        blocked[i] = rec.blocked(i);
    return fit_fringes(t, y, rec.bin_s, opts,
                       rec.beam_blocked.empty()
                           ? std::span<const bool>{}
                           : std::span<const bool>(blocked.get(), rec.size()));
}

BootstrapErrors bootstrap_fit(const CountRecord& rec, const FringeFit& fit,
                              const FitOptions& opts, int resamples, std::uint64_t seed)
{
    if (resamples < 2)
        throw DomainError("bootstrap_fit: at least two resamples are needed");
    FitOptions refit = opts;
    if (!refit.fix_phase_rate)
        refit.phase_rate_guess = fit.phi1;
    std::vector<std::array<double, 5>> draws;
    draws.reserve(static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        Rng rng = make_substream(seed, static_cast<std::uint64_t>(r));
        CountRecord sim = rec;
        for (std::size_t i = 0; i < sim.size(); ++i) {
            double const mu =
                rec.bin_s * (rec.blocked(i) ? fit.background_hz : fit.rate(rec.bin_center(i)));
            sim.counts[i] = std::poisson_distribution<std::int64_t>(std::max(mu, 0.0))(rng);
        }
        auto const f = fit_fringes(sim, refit);
        // Phase offsets are compared on the branch nearest the original fit.
        double const dphi0 = std::remainder(f.phi0 - fit.phi0, c::two_pi);
        draws.push_back({f.mean_rate_hz, f.contrast, dphi0, f.phi1, f.phi2});
    }
    std::array<double, 5> sd{};
    for (std::size_t k = 0; k < 5; ++k) {
        double m = 0;
        for (auto const& d : draws)
            m += d[k];
        m /= static_cast<double>(draws.size());
        double v = 0;
        for (auto const& d : draws)
            v += (d[k] - m) * (d[k] - m);
        sd[k] = std::sqrt(v / static_cast<double>(draws.size() - 1));
    }
    return {sd[0], sd[1], sd[2], sd[3], sd[4], resamples};
}

//---------------------------------------------------------------------------//
// Metrics
//---------------------------------------------------------------------------//

double contrast(double i_max, double i_min)
{
    if (!(i_min >= 0) || !(i_max >= i_min))
        throw DomainError("contrast: requires I_max >= I_min >= 0");
    if (i_max == 0.0)
        throw DomainError("contrast: I_max and I_min are both zero");
    return (i_max - i_min) / (i_max + i_min);
}

double figure_of_merit(double mean_rate, double contrast)
{
    if (!(mean_rate >= 0))
        throw DomainError("figure_of_merit: rate must be non-negative");
    if (!(contrast >= 0 && contrast <= 1))
        throw DomainError("figure_of_merit: contrast must lie in [0, 1]");
    return mean_rate * contrast * contrast;
}

double shot_noise_limit(double mean_rate, double background, double contrast)
{
    if (!(mean_rate > 0) || !(contrast > 0))
        throw DomainError("shot_noise_limit: rate and contrast must be positive");
    if (!(background >= 0))
        throw DomainError("shot_noise_limit: background must be non-negative");
    return std::sqrt(mean_rate + background) / (contrast * mean_rate);
}

double measured_sensitivity(const CountRecord& rec, const FringeFit& fit)
{
    double const slope_scale = rec.bin_s * fit.mean_rate_hz * fit.contrast;
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        if (rec.blocked(i))
            continue;
        double const t = rec.bin_center(i);
        double const phi = fit.phase(t);
        if (std::abs(std::cos(phi)) > 0.5)
            continue;
        double const slope = slope_scale * std::abs(std::sin(phi));
        if (!(slope > 0))
            continue;
        double const resid = static_cast<double>(rec.counts[i]) - rec.bin_s * fit.rate(t);
        sum += (resid / slope) * (resid / slope);
        ++n;
    }
    if (n == 0)
        throw DomainError("measured_sensitivity: fringe slope is zero in every bin");
    return std::sqrt(sum / static_cast<double>(n)) * std::sqrt(rec.bin_s);
}

SensitivityReport sensitivity_report(const CountRecord& rec, const FringeFit& fit)
{
    SensitivityReport r;
    r.measured_rad_sqrt_hz = measured_sensitivity(rec, fit);
    r.shot_noise_rad_sqrt_hz = shot_noise_limit(fit.mean_rate_hz, fit.background_hz, fit.contrast);
    r.figure_of_merit_hz =
        figure_of_merit(fit.mean_rate_hz, std::clamp(fit.contrast, 0.0, 1.0));
    return r;
}

double min_detectable_perturbation(double phase_rad, double interaction_time_s)
{
    if (!(interaction_time_s > 0))
        throw DomainError("min_detectable_perturbation: interaction time must be positive");
    return c::hbar_ev_s * phase_rad / interaction_time_s;
}

double phase_noise_contrast_budget(double ideal_contrast, std::span<const double> sigma_rad)
{
    double out = ideal_contrast;
    for (double s : sigma_rad) {
        if (!(s >= 0))
            throw DomainError("phase_noise_contrast_budget: sigma must be non-negative");
        out *= std::exp(-0.5 * s * s);
    }
    return out;
}

SineFit fit_sinusoid(std::span<const double> x, std::span<const double> y, double period)
{
    if (x.size() != y.size() || x.size() < 3)
        throw InsufficientDataError("fit_sinusoid: needs at least three matched points");
    if (!(period > 0))
        throw DomainError("fit_sinusoid: period must be positive");
    Eigen::MatrixXd a(x.size(), 3);
    Eigen::VectorXd b(x.size());
    double const k = c::two_pi / period;
    for (std::size_t i = 0; i < x.size(); ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = std::cos(k * x[i]);
        a(i, 2) = std::sin(k * x[i]);
        b[i] = y[i];
    }
    Eigen::Vector3d const s = a.colPivHouseholderQr().solve(b);
    SineFit out;
    out.offset = s[0];
    out.amplitude = std::hypot(s[1], s[2]);
    out.phase = std::atan2(-s[2], s[1]);
    return out;
}

std::vector<Peak> find_peaks(std::span<const double> x, std::span<const double> y,
                             double min_separation, double threshold)
{
    if (x.size() != y.size())
        throw DomainError("find_peaks: array sizes differ");
    std::vector<Peak> out;
    if (y.empty())
        return out;
    double const ymax = *std::max_element(y.begin(), y.end());
    if (!(ymax > 0))
        return out;
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < y.size(); ++i) {
        bool const left = i == 0 || y[i] > y[i - 1];
        bool const right = i + 1 == y.size() || y[i] >= y[i + 1];
        if (left && right && y[i] >= threshold * ymax)
            cand.push_back(i);
    }
    std::sort(cand.begin(), cand.end(), [&](auto a, auto b) { return y[a] > y[b]; });
    std::vector<std::size_t> kept;
    for (auto i : cand) {
        bool far = std::all_of(kept.begin(), kept.end(), [&](auto k) {
            return std::abs(x[k] - x[i]) > min_separation;
        });
        if (far)
            kept.push_back(i);
    }
    for (auto i : kept) {
        double const half = 0.5 * y[i];
        std::size_t lo = i, hi = i;
        while (lo > 0 && y[lo - 1] >= half)
            --lo;
        while (hi + 1 < y.size() && y[hi + 1] >= half)
            ++hi;
        double sw = 0, sx = 0;
        for (std::size_t k = lo; k <= hi; ++k) {
            sw += y[k];
            sx += y[k] * x[k];
        }
        out.push_back({sx / sw, y[i]});
    }
    std::sort(out.begin(), out.end(), [](auto a, auto b) { return a.position < b.position; });
    return out;
}

}  // namespace atomint
