#include "atomint/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "atomint/analysis.hpp"
#include "atomint/config.hpp"
#include "atomint/constants.hpp"
#include "atomint/errors.hpp"
#include "atomint/noise.hpp"
#include "atomint/tuning.hpp"

namespace atomint {

namespace fs = std::filesystem;

namespace {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string num(double v)
{
    return fmt::format("{:.10g}", v);
}

void write_file(fs::path const& path, std::string const& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

std::string key_value_text(KeyValues const& kv)
{
    std::string s;
    for (auto const& [k, v] : kv)
        s += fmt::format("{} = {}\n", k, v);
    return s;
}

std::string key_value_csv(KeyValues const& kv)
{
    std::string head, row;
    for (std::size_t i = 0; i < kv.size(); ++i) {
        head += (i ? "," : "") + kv[i].first;
        row += (i ? "," : "") + kv[i].second;
    }
    return head + "\n" + row + "\n";
}

std::map<std::string, std::string> read_key_values(fs::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(fmt::format("cannot read '{}'", path.string()));
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto const eq = line.find(" = ");
        if (eq != std::string::npos)
            kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return kv;
}

std::string fringe_scan_csv(FringeScan const& scan)
{
    std::string s = "sweep_value,port,expected_rate_hz,counts,bin_s\n";
    for (auto const& p : scan.points)
        s += fmt::format("{},{},{},{},{}\n", num(p.sweep_value), p.port, num(p.expected_rate_hz),
                         p.counts, num(scan.bin_s));
    return s;
}

std::string count_record_csv(CountRecord const& rec)
{
    std::string s = "t_start_s,bin_s,counts\n";
    for (std::size_t i = 0; i < rec.size(); ++i)
        s += fmt::format("{},{},{}\n", num(rec.t_start_s[i]), num(rec.bin_s), rec.counts[i]);
    return s;
}

struct Common
{
    std::string config;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::string out;
    std::string model;
    unsigned threads = 0;
    std::vector<std::string> sets;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* samples_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* model_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

RunConfig build_config(Common const& c)
{
    RunConfig cfg = c.config.empty() ? default_run_config() : load_config(c.config);
    if (c.seed_opt->count())
        cfg.seed = c.seed;
    if (c.samples_opt->count())
        cfg.samples = c.samples;
    if (c.threads_opt->count())
        cfg.threads = c.threads;
    if (c.out_opt->count())
        cfg.output_dir = c.out;
    if (c.model_opt->count())
        cfg.interferometer.model = parse_bragg_model(c.model);
    for (auto const& s : c.sets) {
        auto const eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(fmt::format("--set expects PATH=VALUE, got '{}'", s));
        double value = 0;
        try {
            value = std::stod(s.substr(eq + 1));
        } catch (std::exception const&) {
            throw ConfigError(fmt::format("--set value is not a number in '{}'", s));
        }
        cfg = with_parameter(cfg, s.substr(0, eq), value);
    }
    cfg.validate();
    return cfg;
}

fs::path prepare_output(RunConfig const& cfg)
{
    fs::path const dir(cfg.output_dir);
    fs::create_directories(dir);
    save_config(dir / "config_snapshot.json", cfg);
    return dir;
}

//---------------------------------------------------------------------------//
// diffract
//---------------------------------------------------------------------------//

struct DiffractArgs
{
    int grating = 0;
    double power_mw = -1;
};

void cmd_diffract(RunConfig cfg, DiffractArgs const& args, std::ostream& out)
{
    auto& d = cfg.diffraction;
    if (args.grating)
        d.grating = args.grating;
    auto const j = static_cast<std::size_t>(d.grating - 1);
    auto& ic = cfg.interferometer;
    if (args.power_mw >= 0)
        ic.waves[j].power_w = args.power_mw * 1e-3;
    ic.active = {false, false, false};
    ic.active[j] = true;
    ic.geometry.detector_slit_width_m = d.slit_width_m;
    cfg.validate();
    auto const dir = prepare_output(cfg);

    std::vector<double> xs;
    auto const n = static_cast<int>(std::floor((d.slit_to_m - d.slit_from_m) / d.slit_step_m + 1e-9));
    for (int i = 0; i <= n; ++i)
        xs.push_back(d.slit_from_m + i * d.slit_step_m);
    auto profile = diffraction_profile(ic, xs, cfg.samples, cfg.seed, cfg.threads, d.bin_s);
    simulate_counts(profile.scan, cfg.detector, cfg.seed);
    write_file(dir / "diffraction_profile.csv", fringe_scan_csv(profile.scan));

    std::vector<double> rate;
    for (auto const& p : profile.scan.points)
        rate.push_back(p.expected_rate_hz);
    auto const peaks = find_peaks(xs, rate, 0.5 * profile.order_separation_m, 0.05);

    KeyValues kv{{"grating", std::to_string(d.grating)},
                 {"power_mw", num(ic.waves[j].power_w * 1e3)},
                 {"slit_width_um", num(d.slit_width_m * 1e6)},
                 {"samples", std::to_string(cfg.samples)},
                 {"seed", std::to_string(cfg.seed)},
                 {"peak_count", std::to_string(peaks.size())}};
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        kv.emplace_back(fmt::format("peak_{}_x_um", i + 1), num(peaks[i].position * 1e6));
        kv.emplace_back(fmt::format("peak_{}_rate_hz", i + 1), num(peaks[i].height));
    }
    if (peaks.size() >= 2)
        kv.emplace_back("peak_separation_um",
                        num((peaks[1].position - peaks[0].position) * 1e6));
    kv.emplace_back("expected_separation_um", num(profile.order_separation_m * 1e6));
    for (auto const& [p, pop] : profile.order_population)
        kv.emplace_back(fmt::format("order_{}_population", p < 0 ? fmt::format("minus{}", -p)
                                                                   : std::to_string(p)),
                        num(pop));
    AtomSample central;
    central.species = &ic.reference_species();
    central.level = &central.species->levels.back();
    central.speed_m_s = ic.source.mean_speed_m_s;
    double const ladder_minus1 =
        ic.waves[j].power_w > 0 ? order_minus_one_suppression(ic.waves[j], central) : 0.0;
    auto const it = profile.order_population.find(-1);
    double const mc_minus1 = it == profile.order_population.end() ? 0.0 : it->second;
    kv.emplace_back("order_minus1_ladder_population", num(ladder_minus1));
    kv.emplace_back("order_minus1_bound", num(std::max(mc_minus1, ladder_minus1)));
    auto const text = key_value_text(kv);
    write_file(dir / "diffraction_summary.txt", text);
    out << text;
}

//---------------------------------------------------------------------------//
// fringes
//---------------------------------------------------------------------------//

struct FringeArgs
{
    bool no_strays = false;
    double dispersion_rad = -1;
    int port = 0;
};

constexpr std::uint64_t time_record_stream = 0x9e3779b97f4a7c15ULL;

void cmd_fringes(RunConfig cfg, FringeArgs const& args, std::ostream& out)
{
    auto& ic = cfg.interferometer;
    if (args.no_strays)
        ic.include_strays = false;
    if (args.dispersion_rad >= 0)
        ic.phase_dispersion_rad = args.dispersion_rad;
    if (args.port)
        ic.detector_port = args.port;
    cfg.validate();
    auto const dir = prepare_output(cfg);
    auto const& f = cfg.fringes;
    double const period = ic.waves[2].period();
    int const port = ic.detector_port;

    auto const model = fringe_model(ic, cfg.samples, cfg.seed, cfg.threads);

    Sweep xs;
    xs.variable = SweepVariable::mirror3_x;
    for (int i = 0; i < f.scan_points; ++i)
        xs.values.push_back(ic.waves[2].mirror_x_m
                            + f.scan_periods * period * i / (f.scan_points - 1));
    auto scan = apply_vibration_jitter(evaluate_sweep(ic, model, xs, f.bin_s), cfg.vibration,
                                       period, cfg.seed);
    simulate_counts(scan, cfg.detector, cfg.seed);
    write_file(dir / "fringe_scan.csv", fringe_scan_csv(scan));

    Sweep ts;
    ts.variable = SweepVariable::time;
    ts.piezo_rate_m_s = f.piezo_rate_m_s;
    ts.piezo_quadratic_m_s2 = f.piezo_quadratic_m_s2;
    auto const n_bins = static_cast<std::size_t>(std::llround(f.duration_s / f.bin_s));
    for (std::size_t i = 0; i < n_bins; ++i)
        ts.values.push_back((static_cast<double>(i) + 0.5) * f.bin_s);
    std::uint64_t const tseed = cfg.seed ^ time_record_stream;
    auto tscan = apply_vibration_jitter(evaluate_sweep(ic, model, ts, f.bin_s), cfg.vibration,
                                        period, tseed);
    simulate_counts(tscan, cfg.detector, tseed);
    CountRecord rec = to_count_record(tscan, port);
    if (f.background_block_s > 0) {
        auto const block = simulate_counts([](double) { return 0.0; }, cfg.detector, f.bin_s,
                                           f.background_block_s, tseed + 1,
                                           static_cast<double>(n_bins) * f.bin_s);
        rec.beam_blocked.assign(rec.size(), false);
        for (std::size_t i = 0; i < block.size(); ++i) {
            rec.t_start_s.push_back(block.t_start_s[i]);
            rec.counts.push_back(block.counts[i]);
            rec.beam_blocked.push_back(true);
        }
    }
    write_file(dir / "counts.csv", count_record_csv(rec));

    FitOptions opts;
    if (f.background_block_s <= 0)
        opts.background_hz = cfg.detector.background_hz;
    auto const fit = fit_fringes(rec, opts);
    auto const sens = sensitivity_report(rec, fit);

    // Contrast budget: the same atoms without dispersion and tilts.
    InterferometerConfig ideal = ic;
    ideal.phase_dispersion_rad = 0.0;
    for (auto& w : ideal.waves)
        w.theta_z_rad = 0.0;
    double const ideal_c = fringe_model(ideal, cfg.samples, cfg.seed, cfg.threads).port(port).contrast();
    auto const& w = ic.waves;
    double const washout = delta_k_washout({w[0].theta_z_rad, w[1].theta_z_rad, w[2].theta_z_rad},
                                           ic.geometry.aperture_height_m, w[0].grating_k_rad_m);
    double const disp = phase_dispersion_contrast(ic.phase_dispersion_rad);
    double const vib_phase = vibration_phase_rms(cfg.vibration, period);
    double const vib = phase_dispersion_contrast(vib_phase);
    double const velocity = f.piezo_rate_m_s + 2.0 * f.piezo_quadratic_m_s2 * fit.t_ref_s;
    double const fringe_period = fit.phi1 != 0.0 ? constants::two_pi * velocity / std::abs(fit.phi1) : 0.0;

    KeyValues kv{
        {"model", to_string(ic.model)},
        {"port", std::to_string(port)},
        {"samples", std::to_string(cfg.samples)},
        {"seed", std::to_string(cfg.seed)},
        {"model_contrast", num(model.port(port).contrast())},
        {"model_contrast_err", num(model.contrast_error(port))},
        {"model_port1_contrast", num(model.port(1).contrast())},
        {"model_port2_contrast", num(model.port(2).contrast())},
        {"ideal_contrast", num(ideal_c)},
        {"washout_factor", num(washout)},
        {"dispersion_rad", num(ic.phase_dispersion_rad)},
        {"dispersion_factor", num(disp)},
        {"vibration_rms_nm", num(cfg.vibration.rms_m * 1e9)},
        {"vibration_phase_rad", num(vib_phase)},
        {"vibration_factor", num(vib)},
        {"predicted_contrast", num(ideal_c * washout * disp * vib)},
        {"fit_mean_rate_hz", num(fit.mean_rate_hz)},
        {"fit_mean_rate_err_hz", num(fit.mean_rate_err)},
        {"fit_background_hz", num(fit.background_hz)},
        {"fit_background_fitted", fit.background_fitted ? "1" : "0"},
        {"fit_contrast", num(fit.contrast)},
        {"fit_contrast_err", num(fit.contrast_err)},
        {"fit_phi0_rad", num(fit.phi0)},
        {"fit_phi1_rad_s", num(fit.phi1)},
        {"fit_phi2_rad_s2", num(fit.phi2)},
        {"fit_t_ref_s", num(fit.t_ref_s)},
        {"fit_chi_square", num(fit.chi_square)},
        {"fit_dof", std::to_string(fit.dof)},
        {"fringe_period_nm", num(fringe_period * 1e9)},
        {"figure_of_merit_hz", num(sens.figure_of_merit_hz)},
        {"shot_noise_mrad_sqrt_hz", num(sens.shot_noise_rad_sqrt_hz * 1e3)},
        {"measured_sensitivity_mrad_sqrt_hz", num(sens.measured_rad_sqrt_hz * 1e3)},
    };
    auto const text = key_value_text(kv);
    write_file(dir / "fringe_fit.txt", text);
    write_file(dir / "fringe_fit.csv", key_value_csv(kv));
    out << text;
}

//---------------------------------------------------------------------------//
// scan, optimize
//---------------------------------------------------------------------------//

struct ScanArgs
{
    std::string param;
    double from = 0;
    double to = 0;
    int steps = 21;
    std::string metric = "contrast";
};

void cmd_scan(RunConfig const& cfg, ScanArgs const& args, std::ostream& out)
{
    ScanSpec spec;
    spec.parameter = args.param;
    spec.grid = linear_grid(args.from, args.to, args.steps);
    spec.metric = parse_metric(args.metric);
    spec.samples = cfg.samples;
    spec.seed = cfg.seed;
    (void)get_parameter(cfg, spec.parameter);
    auto const dir = prepare_output(cfg);
    auto const pts = scan(cfg, spec);
    std::string s = "param_value,metric,metric_err,n_samples\n";
    for (auto const& p : pts)
        s += fmt::format("{},{},{},{}\n", num(p.param_value), num(p.metric), num(p.metric_err),
                         p.n_samples);
    write_file(dir / "scan.csv", s);
    auto best = std::max_element(pts.begin(), pts.end(),
                                 [](auto const& a, auto const& b) { return a.metric < b.metric; });
    out << fmt::format("scan {} over {} points, metric {}: maximum {} at {}\n", args.param,
                       pts.size(), to_string(spec.metric), num(best->metric),
                       num(best->param_value));
}

struct OptimizeArgs
{
    std::vector<std::string> params;
    std::string metric = "ic2";
    int budget = 150;
};

OptParameter parse_opt_parameter(std::string const& s)
{
    auto const a = s.rfind(':');
    auto const b = a == std::string::npos ? a : s.rfind(':', a - 1);
    if (a == std::string::npos || b == std::string::npos)
        throw ConfigError(fmt::format("--param expects PATH:LOWER:UPPER, got '{}'", s));
    try {
        return {s.substr(0, b), std::stod(s.substr(b + 1, a - b - 1)), std::stod(s.substr(a + 1))};
    } catch (std::invalid_argument const&) {
        throw ConfigError(fmt::format("--param bounds are not numbers in '{}'", s));
    }
}

void cmd_optimize(RunConfig const& cfg, OptimizeArgs const& args, std::ostream& out)
{
    std::vector<OptParameter> params;
    for (auto const& p : args.params)
        params.push_back(parse_opt_parameter(p));
    auto const metric = parse_metric(args.metric);
    if (params.empty())
        throw ConfigError("optimize: give at least one --param");
    if (args.budget < 10 * static_cast<int>(params.size()))
        throw ConfigError(fmt::format("optimize: budget {} is below 10 evaluations per parameter",
                                      args.budget));
    for (auto const& p : params)
        (void)get_parameter(cfg, p.path);
    auto const dir = prepare_output(cfg);
    auto const res = optimize(cfg, params, metric, args.budget, cfg.samples, cfg.seed);

    std::string s = "step,metric";
    for (auto const& p : params)
        s += "," + p.path;
    s += "\n";
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
        s += fmt::format("{},{}", i, num(res.trace[i]));
        for (double v : res.trace_values[i])
            s += "," + num(v);
        s += "\n";
    }
    write_file(dir / "optimize_trace.csv", s);
    save_config(dir / "config_optimized.json", res.config);

    out << fmt::format("metric {} = {} after {} evaluations{}\n", to_string(metric),
                       num(res.final_metric), res.evaluations,
                       res.budget_exhausted ? " (budget exhausted)" : "");
    for (std::size_t i = 0; i < params.size(); ++i)
        out << fmt::format("{} = {}\n", params[i].path, num(res.values[i]));
}

//---------------------------------------------------------------------------//
// report
//---------------------------------------------------------------------------//

void cmd_report(fs::path const& dir, std::ostream& out)
{
    std::vector<std::string> missing;
    if (!fs::is_regular_file(dir / "fringe_fit.txt"))
        missing.push_back((dir / "fringe_fit.txt").string());
    if (!missing.empty()) {
        std::string msg = "report: missing input files:";
        for (auto const& m : missing)
            msg += " " + m;
        throw std::runtime_error(msg);
    }
    auto const kv = read_key_values(dir / "fringe_fit.txt");
    auto get = [&](std::string const& key) {
        auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error(fmt::format("report: fringe_fit.txt lacks '{}'", key));
        return std::stod(it->second);
    };
    double const ideal = get("ideal_contrast");
    double const factors[3] = {get("washout_factor"), get("dispersion_factor"),
                               get("vibration_factor")};
    char const* names[3] = {"x washout", "x phase dispersion", "x vibration"};

    std::string s = "contrast budget\n";
    s += fmt::format("  {:<22}{:>10.4f}\n", "ideal contrast", ideal);
    double c = ideal;
    for (int i = 0; i < 3; ++i) {
        c *= factors[i];
        s += fmt::format("  {:<22}{:>10.4f}  -> {:.4f}\n", names[i], factors[i], c);
    }
    s += fmt::format("  {:<22}{:>10.4f}\n", "predicted contrast", c);
    if (kv.count("fit_contrast"))
        s += fmt::format("  {:<22}{:>10.4f} +- {:.4f}\n", "fitted contrast", get("fit_contrast"),
                         get("fit_contrast_err"));
    if (kv.count("figure_of_merit_hz")) {
        s += "\nsensitivity\n";
        s += fmt::format("  {:<34}{:>10.1f}\n", "mean detected rate (1/s)", get("fit_mean_rate_hz"));
        s += fmt::format("  {:<34}{:>10.1f}\n", "background (1/s)", get("fit_background_hz"));
        s += fmt::format("  {:<34}{:>10.1f}\n", "figure of merit I C^2 (1/s)",
                         get("figure_of_merit_hz"));
        s += fmt::format("  {:<34}{:>10.2f}\n", "shot-noise limit (mrad/sqrt(Hz))",
                         get("shot_noise_mrad_sqrt_hz"));
        s += fmt::format("  {:<34}{:>10.2f}\n", "measured (mrad/sqrt(Hz))",
                         get("measured_sensitivity_mrad_sqrt_hz"));
        s += fmt::format("  {:<34}{:>10.2f}\n", "fringe period (nm)", get("fringe_period_nm"));
    }
    if (fs::is_regular_file(dir / "diffraction_summary.txt")) {
        auto const d = read_key_values(dir / "diffraction_summary.txt");
        s += "\ndiffraction\n";
        for (auto const* key : {"peak_count", "peak_separation_um", "expected_separation_um",
                                "order_minus1_bound"})
            if (d.count(key))
                s += fmt::format("  {:<34}{:>10}\n", key, d.at(key));
    }
    write_file(dir / "report.txt", s);
    out << s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Three-grating Bragg atom interferometer simulator"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config, "JSON configuration file")->check(CLI::ExistingFile);
    common.seed_opt = app.add_option("--seed", common.seed, "random seed");
    common.samples_opt = app.add_option("--samples", common.samples, "Monte Carlo atoms");
    common.out_opt = app.add_option("--out", common.out, "output directory");
    common.model_opt = app.add_option("--model", common.model, "two-level or ladder");
    common.threads_opt = app.add_option("--threads", common.threads, "worker threads");
    app.add_option("--set", common.sets, "override a parameter, PATH=VALUE");

    DiffractArgs dargs;
    auto* diffract = app.add_subcommand("diffract", "single-grating diffraction profile");
    diffract->fallthrough();
    diffract->add_option("--grating", dargs.grating, "active standing wave, 1 to 3");
    diffract->add_option("--power-mw", dargs.power_mw, "power of the active standing wave");

    FringeArgs fargs;
    auto* fringes = app.add_subcommand("fringes", "interference fringes, count record and fit");
    fringes->fallthrough();
    fringes->add_flag("--no-strays", fargs.no_strays, "drop stray paths");
    fringes->add_option("--dispersion-rad", fargs.dispersion_rad, "phase dispersion rms");
    fringes->add_option("--port", fargs.port, "detected exit port, 1 or 2");

    ScanArgs sargs;
    auto* scan_cmd = app.add_subcommand("scan", "metric versus one parameter");
    scan_cmd->fallthrough();
    scan_cmd->add_option("--param", sargs.param, "parameter path")->required();
    scan_cmd->add_option("--from", sargs.from, "first value")->required();
    scan_cmd->add_option("--to", sargs.to, "last value")->required();
    scan_cmd->add_option("--steps", sargs.steps, "number of grid points");
    scan_cmd->add_option("--metric", sargs.metric, "contrast, ic2, port-rate or first-order");

    OptimizeArgs oargs;
    auto* opt_cmd = app.add_subcommand("optimize", "coordinate-descent optimisation");
    opt_cmd->fallthrough();
    opt_cmd->add_option("--param", oargs.params, "PATH:LOWER:UPPER, repeatable")->required();
    opt_cmd->add_option("--metric", oargs.metric, "contrast, ic2, port-rate or first-order");
    opt_cmd->add_option("--budget", oargs.budget, "objective evaluations");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "consolidated report of a run directory");
    report->fallthrough();
    report->add_option("dir", report_dir, "run directory (defaults to --out)");

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return exit_code::success;
        }
        err << "error: " << e.what() << "\n";
        return exit_code::config_error;
    }

    try {
        if (report->parsed()) {
            fs::path dir = report_dir.empty() ? fs::path(common.out.empty() ? "out" : common.out)
                                              : fs::path(report_dir);
            cmd_report(dir, out);
            return exit_code::success;
        }
        RunConfig const cfg = build_config(common);
        if (diffract->parsed())
            cmd_diffract(cfg, dargs, out);
        else if (fringes->parsed())
            cmd_fringes(cfg, fargs, out);
        else if (scan_cmd->parsed())
            cmd_scan(cfg, sargs, out);
        else if (opt_cmd->parsed())
            cmd_optimize(cfg, oargs, out);
    } catch (ConfigError const& e) {
        err << "configuration error: " << e.what() << "\n";
        return exit_code::config_error;
    } catch (ConvergenceError const& e) {
        err << "convergence failure: " << e.what() << "\n";
        return exit_code::convergence_failure;
    } catch (std::exception const& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::runtime_error;
    }
    return exit_code::success;
}

}  // namespace atomint
