#include "atomint/tuning.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "atomint/errors.hpp"

namespace atomint {

std::string to_string(Metric m)
{
    switch (m) {
        case Metric::contrast: return "contrast";
        case Metric::figure_of_merit: return "ic2";
        case Metric::port_rate: return "port-rate";
        case Metric::first_order: return "first-order";
    }
    return "unknown";
}

Metric parse_metric(std::string const& s)
{
    for (auto m : {Metric::contrast, Metric::figure_of_merit, Metric::port_rate,
                   Metric::first_order})
        if (s == to_string(m))
            return m;
    throw ConfigError(
        fmt::format("unknown metric '{}' (expected contrast, ic2, port-rate or first-order)", s));
}

namespace {

double batch_error(std::vector<double> const& v)
{
    if (v.size() < 2)
        return 0.0;
    double mean = 0;
    for (double x : v)
        mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v)
        var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

MetricValue evaluate_metric(const RunConfig& cfg, Metric metric, std::size_t samples,
                            std::uint64_t seed)
{
    auto const model = fringe_model(cfg.interferometer, samples, seed, cfg.threads);
    int const port = cfg.interferometer.detector_port;
    auto const idx = static_cast<std::size_t>(port - 1);
    double const eta = cfg.detector.efficiency;
    MetricValue out;
    std::vector<double> per_batch;
    switch (metric) {
        case Metric::contrast:
            out.value = model.port(port).contrast();
            out.error = model.contrast_error(port);
            return out;
        case Metric::figure_of_merit: {
            auto fom = [eta](PortModel const& p) {
                double const c = p.contrast();
                return eta * p.static_rate_hz * c * c;
            };
            out.value = fom(model.port(port));
            for (auto const& b : model.batches)
                per_batch.push_back(fom(b[idx]));
            out.error = batch_error(per_batch);
            return out;
        }
        case Metric::port_rate:
            out.value = eta * model.port(port).rate();
            for (auto const& b : model.batches)
                per_batch.push_back(eta * b[idx].rate());
            out.error = batch_error(per_batch);
            return out;
        case Metric::first_order:
            out.value = model.first_order_efficiency;
            out.error = model.first_order_error();
            return out;
    }
    return out;
}

std::vector<double> linear_grid(double from, double to, int steps)
{
    if (steps < 1)
        throw ConfigError("grid needs at least one step");
    if (steps == 1)
        return {from};
    std::vector<double> g(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i)
        g[static_cast<std::size_t>(i)] = from + (to - from) * i / (steps - 1);
    return g;
}

std::vector<ScanPoint> scan(const RunConfig& cfg, const ScanSpec& spec)
{
    if (spec.grid.empty())
        throw ConfigError("scan: empty parameter grid");
    if (!std::is_sorted(spec.grid.begin(), spec.grid.end()))
        throw ConfigError("scan: parameter grid must be sorted");
    if (spec.samples == 0)
        throw ConfigError("scan: sample count must be positive");
    (void)get_parameter(cfg, spec.parameter);
    std::vector<ScanPoint> out;
    out.reserve(spec.grid.size());
    for (double v : spec.grid) {
        auto const point_cfg = with_parameter(cfg, spec.parameter, v);
        auto const m = evaluate_metric(point_cfg, spec.metric, spec.samples, spec.seed);
        out.push_back({v, m.value, m.error, spec.samples});
    }
    return out;
}

namespace {

struct BudgetExhausted
{
};

class Objective
{
  public:
    Objective(const RunConfig& cfg, std::span<const OptParameter> params, Metric metric,
              int budget, std::size_t samples, std::uint64_t seed)
        : cfg_(cfg), params_(params), metric_(metric), budget_(budget), samples_(samples),
          seed_(seed)
    {
    }

    double operator()(std::vector<double> const& x)
    {
        if (evaluations_ >= budget_)
            throw BudgetExhausted{};
        ++evaluations_;
        return evaluate_metric(apply(x), metric_, samples_, seed_).value;
    }

    RunConfig apply(std::vector<double> const& x) const
    {
        RunConfig c = cfg_;
        for (std::size_t i = 0; i < params_.size(); ++i)
            c = with_parameter(c, params_[i].path, x[i]);
        return c;
    }

    int evaluations() const { return evaluations_; }

  private:
    const RunConfig& cfg_;
    std::span<const OptParameter> params_;
    Metric metric_;
    int budget_;
    std::size_t samples_;
    std::uint64_t seed_;
    int evaluations_ = 0;
};

}  // namespace

OptimizationResult optimize(const RunConfig& cfg, std::span<const OptParameter> params,
                            Metric metric, int budget, std::size_t samples, std::uint64_t seed)
{
    if (params.empty())
        throw ConfigError("optimize: no parameters given");
    if (budget < 10 * static_cast<int>(params.size()))
        throw ConfigError(fmt::format("optimize: budget {} is below 10 evaluations per parameter",
                                      budget));
    for (auto const& p : params)
        if (!(p.upper > p.lower))
            throw ConfigError(fmt::format("optimize: empty range for '{}'", p.path));

    std::size_t const n = params.size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = std::clamp(get_parameter(cfg, params[i].path), params[i].lower, params[i].upper);

    Objective f(cfg, params, metric, budget, samples, seed);
    OptimizationResult res;
    double best = f(x);
    res.trace.push_back(best);
    res.trace_values.push_back(x);

    constexpr double inv_phi = 0.6180339887498949;
    constexpr int coarse_points = 5;
    try {
        for (int round = 0;; ++round) {
            bool improved = false;
            double const shrink = std::ldexp(1.0, -round);
            for (std::size_t i = 0; i < n; ++i) {
                double const range = params[i].upper - params[i].lower;
                double const tol = 0.01 * range;
                double const half = 0.5 * range * shrink;
                double lo = std::max(params[i].lower, x[i] - half);
                double hi = std::min(params[i].upper, x[i] + half);
                if (round == 0) {
                    lo = params[i].lower;
                    hi = params[i].upper;
                }
                std::vector<double> trial = x;
                auto eval_at = [&](double v) {
                    trial[i] = v;
                    return f(trial);
                };
                double line_best = best;
                double line_x = x[i];
                auto consider = [&](double v, double fv) {
                    if (fv > line_best) {
                        line_best = fv;
                        line_x = v;
                    }
                };
                double const step = (hi - lo) / (coarse_points - 1);
                for (int k = 0; k < coarse_points; ++k) {
                    double const v = lo + k * step;
                    consider(v, eval_at(v));
                }
                double a = std::max(lo, line_x - step);
                double b = std::min(hi, line_x + step);
                double c1 = b - inv_phi * (b - a);
                double c2 = a + inv_phi * (b - a);
                double f1 = eval_at(c1);
                double f2 = eval_at(c2);
                consider(c1, f1);
                consider(c2, f2);
                while (b - a > tol) {
                    if (f1 >= f2) {
                        b = c2;
                        c2 = c1;
                        f2 = f1;
                        c1 = b - inv_phi * (b - a);
                        f1 = eval_at(c1);
                        consider(c1, f1);
                    } else {
                        a = c1;
                        c1 = c2;
                        f1 = f2;
                        c2 = a + inv_phi * (b - a);
                        f2 = eval_at(c2);
                        consider(c2, f2);
                    }
                }
                if (line_best > best) {
                    x[i] = line_x;
                    best = line_best;
                    res.trace.push_back(best);
                    res.trace_values.push_back(x);
                    improved = true;
                }
            }
            ++res.iterations;
            if (!improved && round > 0)
                break;
        }
    } catch (BudgetExhausted const&) {
        res.budget_exhausted = true;
    }
    res.values = x;
    res.final_metric = best;
    res.evaluations = f.evaluations();
    res.config = f.apply(x);
    return res;
}

}  // namespace atomint
