#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "atomint/config.hpp"

namespace atomint {

enum class Metric
{
    contrast,         // contrast at the detector port
    figure_of_merit,  // detected mean rate times contrast squared
    port_rate,        // detected rate at the configured mirror positions
    first_order       // order +1 population at the first active grating
};

std::string to_string(Metric m);
Metric parse_metric(std::string const& s);

struct MetricValue
{
    double value = 0.0;
    double error = 0.0;  // batch-means standard error
};

/// Fixed-seed Monte Carlo evaluation of a metric for one configuration.
MetricValue evaluate_metric(const RunConfig& cfg, Metric metric, std::size_t samples,
                            std::uint64_t seed);

struct ScanSpec
{
    std::string parameter;  // JSON pointer into the run configuration
    std::vector<double> grid;
    Metric metric = Metric::contrast;
    std::size_t samples = 4000;
    std::uint64_t seed = 1;
};

struct ScanPoint
{
    double param_value = 0.0;
    double metric = 0.0;
    double metric_err = 0.0;
    std::size_t n_samples = 0;
};

/// Uniform grid of `steps` values from `from` to `to` inclusive.
std::vector<double> linear_grid(double from, double to, int steps);

std::vector<ScanPoint> scan(const RunConfig& cfg, const ScanSpec& spec);

struct OptParameter
{
    std::string path;
    double lower = 0.0;
    double upper = 0.0;
};

struct OptimizationResult
{
    std::vector<double> values;
    std::vector<double> trace;  // metric after each accepted step, starting point first
    std::vector<std::vector<double>> trace_values;
    double final_metric = 0.0;
    int evaluations = 0;
    int iterations = 0;  // completed coordinate sweeps
    bool budget_exhausted = false;
    RunConfig config;
};

/// Coordinate descent maximising the metric: a coarse grid along each
/// parameter followed by a golden-section search to 1% of its range.
OptimizationResult optimize(const RunConfig& cfg, std::span<const OptParameter> params,
                            Metric metric, int budget, std::size_t samples, std::uint64_t seed);

}  // namespace atomint
