#pragma once

#include "mrr/resonance_fit.hpp"
#include "mrr/ring_model.hpp"
#include "mrr/sfwm_model.hpp"

#include <cstdint>
#include <vector>

namespace mrr {

struct SynthSpec
{
    SfwmParams truth;
    std::vector<double> powers_mw;
    double integration_s = 1.0;
    std::uint64_t rng_seed = 0;
    bool noiseless = false;
    double trace_noise = 0.005;           // additive, fraction of full scale
    std::size_t trace_points = 2001;
    double trace_span_linewidths = 8.0;   // clipped to 0.9 FSR
    std::vector<double> voltages;         // coupling-voltage sweep
    double reference_power_mw = 0.0;      // 0 selects the highest power
};

// 0.01 ... 0.5 mW, ten points.
std::vector<double> default_power_grid();
// 1.10 ... 2.70 V in 0.05 V steps.
std::vector<double> default_voltage_grid();

// Poisson counts drawn per row from independent streams derived from the seed.
// Throws ModelError when a power leaves the validity window.
CountSweep gen_count_sweep(const SynthSpec& spec, const DeviceConfig& config);

struct TraceOptions
{
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::size_t points = 2001;
    double span_linewidths = 8.0;
};

ResonanceTrace gen_resonance_trace(double t, double a, const DeviceConfig& config, const TraceOptions& options = {});

struct ScenarioPoint
{
    double voltage_v = 0.0;
    double phase_rad = 0.0;
    double power_coupling = 0.0;
    double t = 0.0;
    double a = 0.0;
    Resonance truth;
    SfwmParams params;
    ResonanceTrace trace;
    CountSweep counts;
};

// Per voltage: phase -> K -> (t, a) -> resonance; gamma_eff scaled by the
// in-cavity generation factor and eta by the escape efficiency, then a trace
// and a count sweep are synthesized. spec.truth supplies the peak gamma_eff
// (at Γ = 2M) together with beta, delta and the dark counts; its eta values are ignored.
std::vector<ScenarioPoint> gen_fig2_scenario(const DeviceConfig& config, const SynthSpec& spec);

// Scenario defaults: roughly 1e5 coincidences/s at the brightest point.
SynthSpec default_fig2_spec(std::uint64_t seed);

} // namespace mrr
