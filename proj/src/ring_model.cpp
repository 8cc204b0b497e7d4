#include "mrr/ring_model.hpp"

#include "mrr/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace mrr {

namespace {

void require_fraction(double value, std::string_view name)
{
    if (!(value >= 0.0 && value <= 1.0))
        throw InputError(fmt::format("config field '{}' = {} must lie in [0, 1]", name, value));
}

void require_positive(double value, std::string_view name)
{
    if (!(value > 0.0) || !std::isfinite(value))
        throw InputError(fmt::format("config field '{}' = {} must be finite and > 0", name, value));
}

double coupler_amplitude(const DeviceConfig& config)
{
    return std::pow(10.0, -config.coupler_excess_loss_db / 20.0);
}

} // namespace

void validate(const DeviceConfig& config)
{
    require_positive(config.ring_circumference_m, "ring_circumference_m");
    require_positive(config.group_index, "group_index");
    require_positive(config.pump_wavelength_m, "pump_wavelength_m");
    require_positive(config.fsr_hz, "fsr_hz");
    require_positive(config.rep_rate_hz, "rep_rate_hz");
    require_positive(config.pump_spectral_width_m, "pump_spectral_width_m");
    require_fraction(config.round_trip_transmission, "round_trip_transmission");
    require_fraction(config.eta_gc, "eta_gc");
    require_fraction(config.eta_det, "eta_det");
    require_fraction(config.eta_channel_s, "eta_channel_s");
    require_fraction(config.eta_channel_i, "eta_channel_i");
    if (!(config.coupler_excess_loss_db >= 0.0) || !std::isfinite(config.coupler_excess_loss_db))
        throw InputError("config field 'coupler_excess_loss_db' must be finite and >= 0");
    if (!std::isfinite(config.phase_offset_rad) || !std::isfinite(config.phase_per_volt_sq)
        || !std::isfinite(config.resonance_detuning_m))
        throw InputError("config phase calibration and detuning must be finite");
    if (!(resonance_wavelength(config) > 0.0))
        throw InputError("resonance_detuning_m moves the resonance to a non-positive wavelength");

    const double expected_fsr = 1.0 / round_trip_time(config);
    if (std::abs(config.fsr_hz - expected_fsr) > 0.05 * expected_fsr)
        throw InputError(fmt::format("config field 'fsr_hz' = {} disagrees with c/(n_g L) = {} by more than 5%",
                                     config.fsr_hz, expected_fsr));
}

std::string_view to_string(CouplingBranch branch)
{
    switch (branch) {
    case CouplingBranch::UnderCoupled:
        return "under";
    case CouplingBranch::Critical:
        return "critical";
    case CouplingBranch::OverCoupled:
        return "over";
    }
    return "unknown";
}

double angular_frequency(double wavelength_m)
{
    return 2.0 * kPi * kSpeedOfLight / wavelength_m;
}

double round_trip_time(const DeviceConfig& config)
{
    return config.group_index * config.ring_circumference_m / kSpeedOfLight;
}

double resonance_wavelength(const DeviceConfig& config)
{
    return config.pump_wavelength_m + config.resonance_detuning_m;
}

double round_trip_amplitude(const DeviceConfig& config)
{
    return std::sqrt(config.round_trip_transmission);
}

double coupling_from_phase(double phi)
{
    double wrapped = std::fmod(phi, 2.0 * kPi);
    if (wrapped < 0.0)
        wrapped += 2.0 * kPi;
    const double s = std::sin(0.5 * wrapped);
    return std::clamp(s * s, 0.0, 1.0);
}

double self_coupling(double power_coupling, const DeviceConfig& config)
{
    const double k = std::clamp(power_coupling, 0.0, 1.0);
    return std::sqrt(1.0 - k) * coupler_amplitude(config);
}

double phase_from_voltage(double volts, const DeviceConfig& config)
{
    return config.phase_offset_rad + config.phase_per_volt_sq * volts * volts;
}

double min_transmission(double t, double a)
{
    const double num = t - a;
    const double den = 1.0 - t * a;
    return (num * num) / (den * den);
}

std::vector<double> transmission_spectrum(double t, double a, std::span<const double> detuning_hz,
                                          const DeviceConfig& config)
{
    if (!(t >= 0.0 && t <= 1.0))
        throw InputError(fmt::format("self-coupling t = {} outside [0, 1]", t));
    if (!(a > 0.0 && a <= 1.0))
        throw InputError(fmt::format("round-trip amplitude a = {} outside (0, 1]", a));
    if (t == 1.0 && a == 1.0)
        throw InputError("t = a = 1 describes a lossless uncoupled ring; its linewidth is undefined");

    const double t_rt = round_trip_time(config);
    const double ta = t * a;
    std::vector<double> out;
    out.reserve(detuning_hz.size());
    for (double dnu : detuning_hz) {
        const double c = std::cos(2.0 * kPi * dnu * t_rt);
        const double num = a * a - 2.0 * ta * c + t * t;
        const double den = 1.0 - 2.0 * ta * c + ta * ta;
        out.push_back(std::clamp(num / den, 0.0, 1.0));
    }
    return out;
}

double extinction_db(double t_min, double floor)
{
    return -10.0 * std::log10(std::max(t_min, floor));
}

double q_int_from_loss(const DeviceConfig& config)
{
    const double a2 = config.round_trip_transmission;
    if (!(a2 > 0.0 && a2 < 1.0))
        throw InputError(fmt::format("round_trip_transmission = {} must lie in (0, 1) for a finite intrinsic Q", a2));
    const double tau = round_trip_time(config) / -std::log(a2);
    return angular_frequency(resonance_wavelength(config)) * tau;
}

DecayRates rates_from_q(double q_int, double q_ext, double wavelength_m)
{
    if (!(q_int > 0.0) || !(q_ext > 0.0))
        throw InputError("quality factors must be positive");
    const double omega = angular_frequency(wavelength_m);
    DecayRates rates;
    rates.gamma = std::isinf(q_ext) ? 0.0 : omega / q_ext;
    rates.m = omega / q_int;
    rates.q_loaded = 1.0 / (1.0 / q_int + 1.0 / q_ext);
    return rates;
}

CouplingBranch resolve_coupling_branch(double t, double a, double tolerance)
{
    if (std::abs(t - a) <= tolerance)
        return CouplingBranch::Critical;
    return t > a ? CouplingBranch::UnderCoupled : CouplingBranch::OverCoupled;
}

Resonance make_resonance(double center_wavelength_m, double q_int, double q_ext, double extinction,
                         CouplingBranch branch)
{
    const DecayRates rates = rates_from_q(q_int, q_ext, center_wavelength_m);
    Resonance r;
    r.center_wavelength_m = center_wavelength_m;
    r.q_int = q_int;
    r.q_ext = q_ext;
    r.q_loaded = rates.q_loaded;
    r.gamma_hz = rates.gamma;
    r.m_hz = rates.m;
    r.fwhm_hz = kSpeedOfLight / center_wavelength_m / rates.q_loaded;
    r.extinction_db = extinction;
    r.coupling_branch = branch;
    return r;
}

Resonance resonance_from_coupling(double t, double a, const DeviceConfig& config, double transmission_floor)
{
    if (!(t > 0.0 && t <= 1.0))
        throw InputError(fmt::format("self-coupling t = {} must lie in (0, 1] for a finite Q", t));
    if (!(a > 0.0 && a < 1.0))
        throw InputError(fmt::format("round-trip amplitude a = {} must lie in (0, 1)", a));

    const double lambda = resonance_wavelength(config);
    const double omega_t_rt = angular_frequency(lambda) * round_trip_time(config);
    const double q_int = omega_t_rt / -std::log(a * a);
    const double coupling_loss = -std::log(t * t);
    const double q_ext = coupling_loss > 0.0 ? omega_t_rt / coupling_loss : std::numeric_limits<double>::infinity();
    return make_resonance(lambda, q_int, q_ext, extinction_db(min_transmission(t, a), transmission_floor),
                          resolve_coupling_branch(t, a));
}

double self_coupling_for_ratio(double gamma_over_m, const DeviceConfig& config)
{
    if (!(gamma_over_m >= 0.0))
        throw InputError("gamma/M must be non-negative");
    // -ln t² = (Γ/M)(-ln a²)  =>  t = a^(Γ/M)
    return std::pow(round_trip_amplitude(config), gamma_over_m);
}

DeviceConfig calibrate_phase(DeviceConfig config, PhaseAnchor first, PhaseAnchor second)
{
    const double alpha_c = coupler_amplitude(config);
    auto phase_for = [&](const PhaseAnchor& anchor) {
        const double t = self_coupling_for_ratio(anchor.gamma_over_m, config);
        const double k = 1.0 - (t * t) / (alpha_c * alpha_c);
        if (k < 0.0 || k > 1.0)
            throw InputError(fmt::format("Γ/M = {} is not reachable with {} dB coupler excess loss",
                                         anchor.gamma_over_m, config.coupler_excess_loss_db));
        return 2.0 * std::asin(std::sqrt(k));
    };
    const double phi1 = phase_for(first);
    const double phi2 = phase_for(second);
    const double dv2 = second.volts * second.volts - first.volts * first.volts;
    if (dv2 == 0.0)
        throw InputError("phase calibration anchors must have distinct |V|");
    config.phase_per_volt_sq = (phi2 - phi1) / dv2;
    config.phase_offset_rad = phi1 - config.phase_per_volt_sq * first.volts * first.volts;
    return config;
}

DeviceConfig calibrate_phase(DeviceConfig config)
{
    return calibrate_phase(config, PhaseAnchor{1.45, 1.0}, PhaseAnchor{1.85, 4.7});
}

} // namespace mrr
