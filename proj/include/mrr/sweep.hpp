#pragma once

#include "mrr/count_fit.hpp"
#include "mrr/resonance_fit.hpp"
#include "mrr/theory.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mrr {

struct SweepInput
{
    double voltage_v = 0.0;
    std::string label;
    ResonanceTrace trace;
    CountSweep counts;
};

struct SweepOptions
{
    BrightnessVariant variant = BrightnessVariant::PulsedOptimum4M;
    CountFitMode mode = CountFitMode::Full;
    CountFitOptions count_options;
    ResonanceFitOptions resonance_options;
};

struct SweepRow
{
    double voltage_v = 0.0;
    std::string label;
    ResonanceFit resonance;
    SfwmFit counts;
    double reference_power_mw = 0.0;
    double cc_per_s = 0.0;     // measured at the highest power
    double cc_fit_per_s = 0.0; // fitted model at the same power
    OperatingPoint theory;
    double theory_cc_scaled = 0.0;
};

struct SweepResult
{
    std::vector<SweepRow> rows;
    std::vector<std::string> warnings;
};

// Per-voltage fits run concurrently. Afterwards the coupling branch of every
// point is fixed by its side of the extinction maximum: lower voltages are
// under-coupled, higher ones over-coupled.
SweepResult analyze_sweep(std::vector<SweepInput> inputs, const DeviceConfig& config, const SweepOptions& options = {});

// Subdirectories named v<volts> holding trace.csv and counts.csv, sorted by
// voltage. Incomplete subdirectories are skipped with a warning.
std::vector<SweepInput> load_sweep_directory(const std::filesystem::path& dir, std::vector<std::string>& warnings);

std::string voltage_label(double voltage_v);

std::string format_sweep_csv(const SweepResult& result);

} // namespace mrr
