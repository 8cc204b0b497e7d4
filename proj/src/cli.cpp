#include "mrr/cli.hpp"

#include "mrr/error.hpp"
#include "mrr/io.hpp"
#include "mrr/sweep.hpp"
#include "mrr/synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>

namespace mrr {

namespace fs = std::filesystem;

namespace {

struct CommonOptions
{
    std::optional<fs::path> config;
    std::vector<std::string> overrides;
    fs::path out;
};

void add_common(CLI::App* cmd, CommonOptions& common, bool out_required)
{
    cmd->add_option("--config", common.config, "Device config file (key = value)");
    cmd->add_option("--set", common.overrides, "Override one config key, key=value")->take_all();
    auto* out = cmd->add_option("--out", common.out, "Output path");
    if (out_required)
        out->required();
}

BrightnessVariant parse_variant(const std::string& text)
{
    if (text == "pulsed")
        return BrightnessVariant::PulsedOptimum4M;
    if (text == "cw")
        return BrightnessVariant::CwOptimum2M;
    throw InputError(fmt::format("--variant: expected pulsed or cw, got '{}'", text));
}

BranchHint parse_branch(const std::string& text)
{
    if (text == "auto")
        return BranchHint::Auto;
    if (text == "under")
        return BranchHint::Under;
    if (text == "over")
        return BranchHint::Over;
    throw InputError(fmt::format("--branch: expected auto, under or over, got '{}'", text));
}

std::pair<double, double> parse_range(const std::string& text)
{
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw InputError(fmt::format("--range: expected lo:hi, got '{}'", text));
    try {
        std::size_t used_lo = 0;
        std::size_t used_hi = 0;
        const double lo = std::stod(text.substr(0, colon), &used_lo);
        const double hi = std::stod(text.substr(colon + 1), &used_hi);
        if (used_lo != colon || used_hi != text.size() - colon - 1)
            throw std::invalid_argument(text);
        if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi))
            throw InputError(fmt::format("--range: need 0 < lo < hi, got '{}'", text));
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw InputError(fmt::format("--range: expected lo:hi, got '{}'", text));
    }
}

std::string relative_name(const fs::path& path, const fs::path& base)
{
    return path.lexically_relative(base).generic_string();
}

// ---- subcommands ---------------------------------------------------------

int cmd_fit_resonance(const fs::path& trace_path, const CommonOptions& common, const std::string& branch,
                      const std::optional<fs::path>& residuals_path, std::ostream& out)
{
    const DeviceConfig config = resolve_config(common.config, common.overrides);
    const ResonanceTrace trace = read_trace_csv(trace_path);
    ResonanceFitOptions options;
    options.hint = parse_branch(branch);
    const ResonanceFit fit = fit_resonance(trace, config, options);

    RunManifest manifest;
    manifest.subcommand = "fit-resonance";
    manifest.config = config;
    manifest.inputs.push_back(digest_file(trace_path));
    if (common.config)
        manifest.inputs.push_back(digest_file(*common.config));
    manifest.outputs.push_back(common.out.filename().string());
    manifest.options = {{"branch", branch}};
    if (residuals_path) {
        manifest.outputs.push_back(residuals_path->filename().string());
        std::string csv = "wavelength_nm,transmission,model,residual\n";
        for (std::size_t k = 0; k < trace.wavelength_m.size(); ++k)
            csv += fmt::format("{},{},{},{}\n", trace.wavelength_m[k] * 1e9, trace.transmission[k], fit.model[k],
                               fit.residuals[k]);
        write_text_file(*residuals_path, csv);
    }
    nlohmann::json report = to_json(fit);
    report["manifest"] = to_json(manifest);
    write_text_file(common.out, dump_json(report));

    const Resonance& r = fit.resonance;
    out << fmt::format("q_loaded {:.6g}  extinction {:.3f} dB  Γ/M {:.4g}  branch {}\n", r.q_loaded, r.extinction_db,
                       r.gamma_over_m(), to_string(r.coupling_branch));
    return kExitOk;
}

int cmd_fit_counts(const fs::path& sweep_path, const CommonOptions& common, const std::string& mode_text,
                   double low_power_max, double loss_rel_sigma, std::ostream& out, std::ostream& err)
{
    const DeviceConfig config = resolve_config(common.config, common.overrides);
    const CountSweep sweep = read_count_csv(sweep_path);
    const CountFitMode mode = parse_count_fit_mode(mode_text);
    CountFitOptions options;
    options.low_power_max_mw = low_power_max;
    options.loss_budget_rel_sigma = loss_rel_sigma;
    const SfwmFit fit = fit_counts(sweep, config, mode, options);
    for (const auto& w : fit.warnings)
        err << "warning: " << w << "\n";

    RunManifest manifest;
    manifest.subcommand = "fit-counts";
    manifest.config = config;
    manifest.inputs.push_back(digest_file(sweep_path));
    if (common.config)
        manifest.inputs.push_back(digest_file(*common.config));
    manifest.outputs.push_back(common.out.filename().string());
    manifest.options = {{"mode", to_string(mode)}, {"low_power_max_mw", low_power_max},
                        {"loss_budget_rel_sigma", loss_rel_sigma}};
    nlohmann::json report = to_json(fit);
    report["manifest"] = to_json(manifest);
    write_text_file(common.out, dump_json(report));

    out << fmt::format("eta_s {:.5g}  eta_i {:.5g}  gamma_eff {:.5g} Mpairs/s/mW²  intrinsic s {:.4f} i {:.4f}\n",
                       fit.params.eta_s, fit.params.eta_i, fit.params.gamma_eff / kPairsPerMpair,
                       fit.intrinsic_s.value, fit.intrinsic_i.value);
    return kExitOk;
}

int cmd_sweep(const fs::path& dir, const CommonOptions& common, const std::string& variant_text,
              const std::string& mode_text, std::ostream& out, std::ostream& err)
{
    const DeviceConfig config = resolve_config(common.config, common.overrides);
    SweepOptions options;
    options.variant = parse_variant(variant_text);
    options.mode = parse_count_fit_mode(mode_text);

    std::vector<std::string> warnings;
    std::vector<SweepInput> inputs = load_sweep_directory(dir, warnings);
    RunManifest manifest;
    manifest.subcommand = "sweep";
    manifest.config = config;
    for (const auto& input : inputs) {
        for (const char* file : {"trace.csv", "counts.csv"}) {
            InputDigest d = digest_file(dir / input.label / file);
            d.name = input.label + "/" + file;
            manifest.inputs.push_back(std::move(d));
        }
    }
    if (common.config)
        manifest.inputs.push_back(digest_file(*common.config));

    SweepResult result = analyze_sweep(std::move(inputs), config, options);
    warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
    for (const auto& w : warnings)
        err << "warning: " << w << "\n";

    fs::create_directories(common.out);
    for (const auto& row : result.rows) {
        const fs::path report_path = common.out / "points" / (row.label + ".json");
        nlohmann::json report = {
            {"voltage_v", row.voltage_v},
            {"resonance_fit", to_json(row.resonance)},
            {"count_fit", to_json(row.counts)},
            {"reference_power_mw", row.reference_power_mw},
            {"cc_per_s", row.cc_per_s},
            {"cc_fit_per_s", row.cc_fit_per_s},
        };
        write_text_file(report_path, dump_json(report));
        manifest.outputs.push_back(relative_name(report_path, common.out));
    }
    write_text_file(common.out / "sweep.csv", format_sweep_csv(result));
    manifest.outputs.push_back("sweep.csv");
    manifest.options = {{"variant", to_string(options.variant)}, {"mode", to_string(options.mode)},
                        {"warnings", warnings}};
    write_text_file(common.out / "manifest.json", dump_json(to_json(manifest)));

    out << fmt::format("{} voltage points written to {}\n", result.rows.size(), (common.out / "sweep.csv").string());
    return kExitOk;
}

int cmd_predict(const CommonOptions& common, const std::string& variant_text, const std::string& range_text,
                std::size_t points, std::ostream& out)
{
    const DeviceConfig config = resolve_config(common.config, common.overrides);
    const BrightnessVariant variant = parse_variant(variant_text);
    const auto [lo, hi] = parse_range(range_text);
    if (points < 2)
        throw InputError("--points must be at least 2");

    const double m_hz = -std::log(config.round_trip_transmission) / round_trip_time(config);
    const TheoryCurve curve = make_theory_curve(variant, m_hz, lo, hi, points);
    const MaximumResult best =
        golden_section_maximize([variant](double x) { return brightness_norm(x, variant); }, lo, hi);

    write_text_file(common.out, format_theory_csv(curve));
    fs::path summary_path = common.out;
    summary_path.replace_extension(".summary.json");

    RunManifest manifest;
    manifest.subcommand = "predict";
    manifest.config = config;
    if (common.config)
        manifest.inputs.push_back(digest_file(*common.config));
    manifest.outputs = {common.out.filename().string(), summary_path.filename().string()};
    manifest.options = {{"variant", to_string(variant)}, {"range", {lo, hi}}, {"points", points}};
    nlohmann::json summary = {
        {"variant", to_string(variant)},
        {"argmax_gamma_over_m", best.x},
        {"max_brightness_norm", best.value},
        {"argmax_at_boundary", best.at_boundary},
        {"escape_at_argmax", escape_efficiency(best.x, 1.0)},
        {"m_rad_per_s", m_hz},
        {"manifest", to_json(manifest)},
    };
    write_text_file(summary_path, dump_json(summary));

    out << fmt::format("argmax Γ/M = {:.6f}{}\n", best.x, best.at_boundary ? " (at range boundary)" : "");
    return kExitOk;
}

int cmd_simulate(const fs::path& spec_path, const CommonOptions& common, std::optional<std::uint64_t> seed,
                 std::ostream& out)
{
    const DeviceConfig config = resolve_config(common.config, common.overrides);
    SimulationSpec spec = parse_simulation_spec(read_text_file(spec_path), spec_path.string());
    if (seed) {
        spec.synth.rng_seed = *seed;
        spec.has_seed = true;
    }
    if (!spec.has_seed)
        throw InputError(fmt::format("{}: field 'seed': missing; give it in the spec or with --seed", spec_path.string()));

    RunManifest manifest;
    manifest.subcommand = "simulate";
    manifest.config = config;
    manifest.seed = spec.synth.rng_seed;
    manifest.inputs.push_back(digest_file(spec_path));
    if (common.config)
        manifest.inputs.push_back(digest_file(*common.config));

    fs::create_directories(common.out);
    auto emit = [&](const fs::path& rel, const std::string& text) {
        write_text_file(common.out / rel, text);
        manifest.outputs.push_back(rel.generic_string());
    };

    nlohmann::json truth = nlohmann::json::object();
    if (!spec.synth.voltages.empty()) {
        const auto points = gen_fig2_scenario(config, spec.synth);
        nlohmann::json list = nlohmann::json::array();
        for (const auto& pt : points) {
            const std::string label = voltage_label(pt.voltage_v);
            emit(fs::path(label) / "trace.csv", format_trace_csv(pt.trace));
            emit(fs::path(label) / "counts.csv", format_count_csv(pt.counts));
            list.push_back({{"voltage_v", pt.voltage_v}, {"label", label}, {"phase_rad", pt.phase_rad},
                            {"power_coupling", pt.power_coupling}, {"t", pt.t}, {"a", pt.a},
                            {"resonance", to_json(pt.truth)}, {"params", to_json(pt.params)}});
        }
        truth["scenario"] = list;
    } else {
        const CountSweep sweep = gen_count_sweep(spec.synth, config);
        emit("counts.csv", format_count_csv(sweep));
        truth["params"] = to_json(spec.synth.truth);
    }
    if (spec.trace_gamma_over_m) {
        const double t = self_coupling_for_ratio(*spec.trace_gamma_over_m, config);
        const double a = round_trip_amplitude(config);
        TraceOptions opts;
        opts.noise = spec.synth.noiseless ? 0.0 : spec.synth.trace_noise;
        opts.seed = spec.synth.rng_seed;
        opts.points = spec.synth.trace_points;
        opts.span_linewidths = spec.synth.trace_span_linewidths;
        emit("trace.csv", format_trace_csv(gen_resonance_trace(t, a, config, opts)));
        truth["trace"] = {{"t", t}, {"a", a}, {"resonance", to_json(resonance_from_coupling(t, a, config))}};
    }
    manifest.options = {{"truth", truth}};
    write_text_file(common.out / "manifest.json", dump_json(to_json(manifest)));
    out << fmt::format("{} files written to {}\n", manifest.outputs.size() + 1, common.out.string());
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Microring photon-pair source analysis", std::string(kToolName)};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    CommonOptions common;
    fs::path input;
    std::string branch = "auto";
    std::optional<fs::path> residuals;
    std::string mode = "full";
    std::string variant = "pulsed";
    std::string range = "0.1:100";
    std::size_t points = 401;
    double low_power_max = 0.05;
    double loss_rel_sigma = 0.0;
    std::optional<std::uint64_t> seed;

    auto* fit_res = app.add_subcommand("fit-resonance", "Fit one transmission trace");
    fit_res->add_option("trace", input, "Trace CSV (wavelength_nm,transmission)")->required();
    add_common(fit_res, common, true);
    fit_res->add_option("--branch", branch, "Coupling branch for the Γ/M split: auto, under, over");
    fit_res->add_option("--residuals", residuals, "Write per-point model and residuals to this CSV");

    auto* fit_cnt = app.add_subcommand("fit-counts", "Fit a power sweep of singles and coincidences");
    fit_cnt->add_option("sweep", input, "Count CSV (power_mw,integration_s,c_s,c_i,cc)")->required();
    add_common(fit_cnt, common, true);
    fit_cnt->add_option("--mode", mode, "full, low-power or shared-beta");
    fit_cnt->add_option("--low-power-max", low_power_max, "Highest power (mW) kept in low-power mode");
    fit_cnt->add_option("--loss-rel-sigma", loss_rel_sigma, "Relative 1σ of the loss budget");

    auto* sweep = app.add_subcommand("sweep", "Analyze a coupling-voltage sweep directory");
    sweep->add_option("dir", input, "Directory of v<volts>/{trace,counts}.csv")->required();
    add_common(sweep, common, true);
    sweep->add_option("--variant", variant, "Brightness model: pulsed or cw");
    sweep->add_option("--mode", mode, "Count fit mode");

    auto* predict = app.add_subcommand("predict", "Theory curve of escape efficiency and brightness versus Γ/M");
    add_common(predict, common, true);
    predict->add_option("--variant", variant, "pulsed or cw");
    predict->add_option("--range", range, "Γ/M range lo:hi");
    predict->add_option("--points", points, "Number of log-spaced samples");

    auto* simulate = app.add_subcommand("simulate", "Generate a seeded synthetic dataset");
    simulate->add_option("spec", input, "Simulation spec (key = value)")->required();
    add_common(simulate, common, true);
    simulate->add_option("--seed", seed, "RNG seed, overrides the spec");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }

    try {
        if (fit_res->parsed())
            return cmd_fit_resonance(input, common, branch, residuals, out);
        if (fit_cnt->parsed())
            return cmd_fit_counts(input, common, mode, low_power_max, loss_rel_sigma, out, err);
        if (sweep->parsed())
            return cmd_sweep(input, common, variant, mode, out, err);
        if (predict->parsed())
            return cmd_predict(common, variant, range, points, out);
        if (simulate->parsed())
            return cmd_simulate(input, common, seed, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << "\n";
        return kExitModel;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}

} // namespace mrr
