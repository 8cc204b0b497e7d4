#include "mrr/sweep.hpp"

#include "mrr/error.hpp"
#include "mrr/io.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <future>

namespace mrr {

namespace fs = std::filesystem;

namespace {

struct PointFit
{
    ResonanceFit resonance;
    SfwmFit counts;
};

PointFit fit_point(const SweepInput& input, const DeviceConfig& config, const SweepOptions& options)
{
    PointFit out;
    try {
        out.resonance = fit_resonance(input.trace, config, options.resonance_options);
        out.counts = fit_counts(input.counts, config, options.mode, options.count_options);
    } catch (const InputError& e) {
        throw InputError(fmt::format("{}: {}", input.label, e.what()));
    } catch (const ModelError& e) {
        throw ModelError(fmt::format("{}: {}", input.label, e.what()));
    }
    return out;
}

} // namespace

std::string voltage_label(double voltage_v)
{
    return fmt::format("v{:.3f}", voltage_v);
}

SweepResult analyze_sweep(std::vector<SweepInput> inputs, const DeviceConfig& config, const SweepOptions& options)
{
    if (inputs.empty())
        throw InputError("sweep has no voltage points");
    std::stable_sort(inputs.begin(), inputs.end(),
                     [](const SweepInput& a, const SweepInput& b) { return a.voltage_v < b.voltage_v; });
    for (std::size_t k = 1; k < inputs.size(); ++k)
        if (inputs[k].voltage_v == inputs[k - 1].voltage_v)
            throw InputError(fmt::format("duplicate sweep voltage {} V", inputs[k].voltage_v));

    std::vector<std::future<PointFit>> jobs;
    jobs.reserve(inputs.size());
    for (const auto& input : inputs)
        jobs.push_back(std::async(std::launch::async, fit_point, std::cref(input), std::cref(config), std::cref(options)));

    SweepResult result;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        PointFit fit = jobs[k].get();
        SweepRow row;
        row.voltage_v = inputs[k].voltage_v;
        row.label = inputs[k].label;
        row.resonance = std::move(fit.resonance);
        row.counts = std::move(fit.counts);
        const CountRow& ref = inputs[k].counts.rows.back();
        row.reference_power_mw = ref.power_mw;
        row.cc_per_s = ref.cc;
        const AccidentalModel acc = options.count_options.accidentals.value_or(AccidentalModel::pulsed(config.rep_rate_hz));
        row.cc_fit_per_s = coincidence_rate(row.counts.params, ref.power_mw, acc);
        for (const auto& w : row.counts.warnings)
            result.warnings.push_back(fmt::format("{}: {}", row.label, w));
        result.rows.push_back(std::move(row));
    }

    // Branch continuity around the extinction maximum.
    const auto peak = std::max_element(result.rows.begin(), result.rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return a.resonance.resonance.extinction_db < b.resonance.resonance.extinction_db;
    });
    const auto peak_index = static_cast<std::size_t>(peak - result.rows.begin());
    for (std::size_t k = 0; k < result.rows.size(); ++k) {
        if (k == peak_index)
            continue;
        ResonanceFit& rf = result.rows[k].resonance;
        const BranchHint hint = k < peak_index ? BranchHint::Under : BranchHint::Over;
        const QualitySplit split = split_quality(rf.resonance.center_wavelength_m, rf.resonance.q_loaded, rf.t_min,
                                                 config, hint, options.resonance_options);
        rf.resonance = split.resonance;
        rf.self_coupling = split.t;
        rf.round_trip_amplitude = split.a;
    }

    double num = 0.0;
    double den = 0.0;
    for (auto& row : result.rows) {
        row.theory = predict_operating_point(row.resonance.resonance, options.variant);
        num += row.cc_per_s * row.theory.brightness_norm;
        den += row.theory.brightness_norm * row.theory.brightness_norm;
    }
    const double scale = den > 0.0 ? num / den : 0.0;
    for (auto& row : result.rows)
        row.theory_cc_scaled = scale * row.theory.brightness_norm;
    return result;
}

std::vector<SweepInput> load_sweep_directory(const fs::path& dir, std::vector<std::string>& warnings)
{
    if (!fs::is_directory(dir))
        throw InputError(fmt::format("{}: not a directory", dir.string()));
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory())
            subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());

    std::vector<SweepInput> inputs;
    for (const auto& sub : subdirs) {
        const std::string name = sub.filename().string();
        if (name.size() < 2 || name.front() != 'v')
            continue;
        double volts = 0.0;
        try {
            std::size_t used = 0;
            volts = std::stod(name.substr(1), &used);
            if (used != name.size() - 1)
                throw std::invalid_argument(name);
        } catch (const std::exception&) {
            warnings.push_back(fmt::format("{}: directory name is not v<volts>, skipped", name));
            continue;
        }
        const fs::path trace = sub / "trace.csv";
        const fs::path counts = sub / "counts.csv";
        if (!fs::exists(trace) || !fs::exists(counts)) {
            warnings.push_back(fmt::format("{}: missing {}, voltage point skipped", name,
                                           fs::exists(trace) ? "counts.csv" : "trace.csv"));
            continue;
        }
        inputs.push_back({volts, name, read_trace_csv(trace), read_count_csv(counts)});
    }
    if (inputs.empty())
        throw InputError(fmt::format("{}: no v<volts> subdirectories with trace.csv and counts.csv", dir.string()));
    std::sort(inputs.begin(), inputs.end(), [](const SweepInput& a, const SweepInput& b) { return a.voltage_v < b.voltage_v; });
    return inputs;
}

std::string format_sweep_csv(const SweepResult& result)
{
    std::string out = "voltage_v,q_loaded,extinction_db,gamma_over_m,cc_per_s,cc_fit_per_s,eta_s_intrinsic,"
                      "eta_i_intrinsic,coupling_branch,theory_escape,theory_brightness_norm,theory_cc_scaled,regime\n";
    for (const auto& row : result.rows) {
        const Resonance& r = row.resonance.resonance;
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", row.voltage_v, r.q_loaded, r.extinction_db,
                           r.gamma_over_m(), row.cc_per_s, row.cc_fit_per_s, row.counts.intrinsic_s.value,
                           row.counts.intrinsic_i.value, to_string(r.coupling_branch), row.theory.escape_eff,
                           row.theory.brightness_norm, row.theory_cc_scaled, to_string(row.theory.regime));
    }
    return out;
}

} // namespace mrr
