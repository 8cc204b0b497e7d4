#include "mrr/synth.hpp"

#include "mrr/error.hpp"
#include "mrr/theory.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <random>

namespace mrr {

namespace {

// Independent generator per (stream, index) so rows can be produced in any order.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

constexpr std::uint64_t kCountStream = 1;
constexpr std::uint64_t kTraceStream = 2;

double draw_rate(std::mt19937_64& rng, double rate, double integration_s)
{
    const double expected = rate * integration_s;
    if (expected <= 0.0)
        return 0.0;
    std::poisson_distribution<long long> dist(expected);
    return static_cast<double>(dist(rng)) / integration_s;
}

} // namespace

std::vector<double> default_power_grid()
{
    std::vector<double> grid;
    for (int k = 0; k < 10; ++k)
        grid.push_back(0.01 + (0.5 - 0.01) * k / 9.0);
    return grid;
}

std::vector<double> default_voltage_grid()
{
    std::vector<double> grid;
    for (int k = 0; k <= 32; ++k)
        grid.push_back(std::round((1.10 + 0.05 * k) * 1000.0) / 1000.0);
    return grid;
}

CountSweep gen_count_sweep(const SynthSpec& spec, const DeviceConfig& config)
{
    if (spec.powers_mw.empty())
        throw InputError("synthetic sweep needs at least one power");
    if (!(spec.integration_s > 0.0))
        throw InputError("integration_s must be > 0");
    validate(spec.truth);

    CountSweep sweep;
    for (std::size_t k = 0; k < spec.powers_mw.size(); ++k) {
        const double p = spec.powers_mw[k];
        CountRow row;
        row.power_mw = p;
        row.integration_s = spec.integration_s;
        const double rs = singles_rate(spec.truth, p, Arm::Signal);
        const double ri = singles_rate(spec.truth, p, Arm::Idler);
        const double rc = coincidence_rate(spec.truth, p, config.rep_rate_hz);
        if (spec.noiseless) {
            row.c_s = rs;
            row.c_i = ri;
            row.cc = rc;
        } else {
            std::mt19937_64 rng = stream(spec.rng_seed, kCountStream, k);
            row.c_s = draw_rate(rng, rs, spec.integration_s);
            row.c_i = draw_rate(rng, ri, spec.integration_s);
            row.cc = draw_rate(rng, rc, spec.integration_s);
        }
        row.cc = std::min({row.cc, row.c_s, row.c_i});
        sweep.rows.push_back(row);
    }
    return sweep;
}

ResonanceTrace gen_resonance_trace(double t, double a, const DeviceConfig& config, const TraceOptions& options)
{
    if (options.points < 8)
        throw InputError("trace needs at least 8 points");
    const Resonance res = resonance_from_coupling(t, a, config);
    const double nu0 = kSpeedOfLight / res.center_wavelength_m;
    const double fsr = 1.0 / round_trip_time(config);
    const double span = std::min(options.span_linewidths * res.fwhm_hz, 0.9 * fsr);

    std::vector<double> detuning(options.points);
    for (std::size_t k = 0; k < options.points; ++k)
        detuning[k] = -0.5 * span + span * static_cast<double>(k) / static_cast<double>(options.points - 1);
    // Ascending wavelength is descending frequency.
    std::reverse(detuning.begin(), detuning.end());

    ResonanceTrace trace;
    trace.transmission = transmission_spectrum(t, a, detuning, config);
    trace.wavelength_m.reserve(options.points);
    for (double dnu : detuning)
        trace.wavelength_m.push_back(kSpeedOfLight / (nu0 + dnu));

    if (options.noise > 0.0) {
        std::mt19937_64 rng = stream(options.seed, kTraceStream, 0);
        std::normal_distribution<double> gauss(0.0, options.noise);
        for (double& v : trace.transmission)
            v = std::clamp(v + gauss(rng), 0.0, 1.05);
    }
    return trace;
}

std::vector<ScenarioPoint> gen_fig2_scenario(const DeviceConfig& config, const SynthSpec& spec)
{
    if (spec.voltages.empty())
        throw InputError("coupling-sweep scenario needs a voltage grid");
    validate(config);
    const double a = round_trip_amplitude(config);
    const double t_rt = round_trip_time(config);

    std::vector<ScenarioPoint> points;
    for (std::size_t k = 0; k < spec.voltages.size(); ++k) {
        ScenarioPoint pt;
        pt.voltage_v = spec.voltages[k];
        pt.phase_rad = phase_from_voltage(pt.voltage_v, config);
        pt.power_coupling = coupling_from_phase(pt.phase_rad);
        pt.t = self_coupling(pt.power_coupling, config);
        pt.a = a;
        if (!(pt.t > 0.0))
            throw InputError(fmt::format("voltage {} V drives the coupler to full cross state (t = 0)", pt.voltage_v));
        pt.truth = resonance_from_coupling(pt.t, a, config);

        const double ratio = (-std::log(pt.t * pt.t) / t_rt) / (-std::log(a * a) / t_rt);
        const double escape = escape_efficiency(ratio, 1.0);
        pt.params = spec.truth;
        pt.params.gamma_eff = spec.truth.gamma_eff * generation_factor_norm(ratio);
        pt.params.eta_s = escape * loss_budget(config, Arm::Signal);
        pt.params.eta_i = escape * loss_budget(config, Arm::Idler);

        TraceOptions trace_opts;
        trace_opts.noise = spec.noiseless ? 0.0 : spec.trace_noise;
        trace_opts.seed = spec.rng_seed ^ (0x9E3779B97F4A7C15ULL * (k + 1));
        trace_opts.points = spec.trace_points;
        trace_opts.span_linewidths = spec.trace_span_linewidths;
        pt.trace = gen_resonance_trace(pt.t, a, config, trace_opts);

        SynthSpec row_spec = spec;
        row_spec.truth = pt.params;
        row_spec.rng_seed = spec.rng_seed + 0x632BE59BD9B4E019ULL * (k + 1);
        pt.counts = gen_count_sweep(row_spec, config);
        points.push_back(std::move(pt));
    }
    return points;
}

SynthSpec default_fig2_spec(std::uint64_t seed)
{
    SynthSpec spec;
    spec.truth.gamma_eff = 2.4e7;
    spec.truth.beta_s = 2e4;
    spec.truth.beta_i = 2e4;
    spec.truth.delta = 0.5;
    spec.truth.dc_s = 200;
    spec.truth.dc_i = 200;
    spec.powers_mw = default_power_grid();
    spec.integration_s = 100.0;
    spec.rng_seed = seed;
    spec.voltages = default_voltage_grid();
    return spec;
}

} // namespace mrr
