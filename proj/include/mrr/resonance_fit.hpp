#pragma once

#include "mrr/fit_engine.hpp"
#include "mrr/ring_model.hpp"

#include <string_view>
#include <vector>

namespace mrr {

// Bus transmission versus wavelength, wavelengths strictly increasing.
struct ResonanceTrace
{
    std::vector<double> wavelength_m;
    std::vector<double> transmission;
};

enum class BranchHint
{
    Auto,  // the root closest to the config's intrinsic loss is the intrinsic one
    Under,
    Over,
};

std::string_view to_string(BranchHint hint);

struct ResonanceFitOptions
{
    double transmission_floor = 1e-4;   // T_min lower bound; caps extinction at 40 dB
    double critical_extinction_db = 30; // at or above this the dip is labeled Critical
    BranchHint hint = BranchHint::Auto;
    bool fit_baseline = false;
    FitSettings settings;
};

struct ResonanceFit
{
    Resonance resonance;
    FitResult fit;
    double t_min = 0.0;
    double baseline = 1.0;
    double q_loaded_sigma = 0.0;
    double extinction_db_sigma = 0.0;
    double self_coupling = 0.0;        // t of the chosen split
    double round_trip_amplitude = 0.0; // a of the chosen split
    std::vector<double> model;
    std::vector<double> residuals;
};

// Parameters: center offset (GHz from the deepest sample), loaded FWHM (GHz),
// normalized T_min, baseline. The dip is a Lorentzian in the FSR-periodic
// detuning sin(pi dnu T_rt), the exact all-pass ring line shape.
FitProblem build_resonance_problem(const ResonanceTrace& trace, const DeviceConfig& config,
                                   const ResonanceFitOptions& options = {});

// Splits a measured (q_loaded, T_min) pair into intrinsic and extrinsic parts.
struct QualitySplit
{
    Resonance resonance;
    double t = 0.0;
    double a = 0.0;
};

QualitySplit split_quality(double center_wavelength_m, double q_loaded, double t_min, const DeviceConfig& config,
                           BranchHint hint, const ResonanceFitOptions& options = {});

// Throws NoResonanceError for a flat trace (min > 0.99 of baseline) and
// AmbiguousResonanceError when more than one dip is present.
ResonanceFit fit_resonance(const ResonanceTrace& trace, const DeviceConfig& config,
                           const ResonanceFitOptions& options = {});

} // namespace mrr
