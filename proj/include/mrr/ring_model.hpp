#pragma once

#include <numbers>
#include <span>
#include <string_view>
#include <vector>

namespace mrr {

inline constexpr double kSpeedOfLight = 299'792'458.0; // m/s
inline constexpr double kPi = std::numbers::pi;

// Physical constants of the chip and test bench. SI units throughout.
struct DeviceConfig
{
    double ring_circumference_m = 699e-6;
    double group_index = 4.2;
    double round_trip_transmission = 0.944; // a², intensity per round trip
    double pump_wavelength_m = 1550.12e-9;
    double fsr_hz = 100e9;
    double rep_rate_hz = 50e6;
    double pump_spectral_width_m = 158e-12;
    double eta_gc = 0.582;
    double eta_det = 0.88;
    double eta_channel_s = 0.357;
    double eta_channel_i = 0.354;
    double coupler_excess_loss_db = 0.05;
    // Thermo-optic calibration phi(V) = phase_offset_rad + phase_per_volt_sq * V².
    // Defaults are what calibrate_phase() produces for the default losses.
    double phase_offset_rad = -0.47815497136271901;
    double phase_per_volt_sq = 0.43091554620799277;
    double resonance_detuning_m = 0.0;
};

// Throws InputError when a field is out of range or the FSR disagrees with
// c/(n_g L) by more than 5%.
void validate(const DeviceConfig& config);

enum class CouplingBranch
{
    UnderCoupled,
    Critical,
    OverCoupled,
};

std::string_view to_string(CouplingBranch branch);

// One ring resonance. gamma_hz and m_hz are energy decay rates in rad/s.
struct Resonance
{
    double center_wavelength_m = 0.0;
    double fwhm_hz = 0.0;
    double extinction_db = 0.0;
    double q_loaded = 0.0;
    double q_int = 0.0;
    double q_ext = 0.0;
    double gamma_hz = 0.0;
    double m_hz = 0.0;
    CouplingBranch coupling_branch = CouplingBranch::Critical;

    double gamma_over_m() const { return gamma_hz / m_hz; }
};

struct DecayRates
{
    double gamma = 0.0; // bus coupling rate, rad/s
    double m = 0.0;     // intrinsic loss rate, rad/s
    double q_loaded = 0.0;
};

double angular_frequency(double wavelength_m);
double round_trip_time(const DeviceConfig& config);
double resonance_wavelength(const DeviceConfig& config);
double round_trip_amplitude(const DeviceConfig& config);

// Balanced MZI: K = sin²(phi/2). phi is wrapped into [0, 2pi).
double coupling_from_phase(double phi);
// Bus self-coupling amplitude for power coupling K, including the per-coupler excess loss.
double self_coupling(double power_coupling, const DeviceConfig& config);
double phase_from_voltage(double volts, const DeviceConfig& config);

// All-pass ring intensity transmission at the given frequency detunings (Hz).
std::vector<double> transmission_spectrum(double t, double a, std::span<const double> detuning_hz,
                                          const DeviceConfig& config);
// On-resonance transmission ((t-a)/(1-ta))².
double min_transmission(double t, double a);
// -10 log10(max(t_min, floor)).
double extinction_db(double t_min, double floor = 0.0);

double q_int_from_loss(const DeviceConfig& config);
DecayRates rates_from_q(double q_int, double q_ext, double wavelength_m);

CouplingBranch resolve_coupling_branch(double t, double a, double tolerance = 1e-9);

// Builds a Resonance from its intrinsic and extrinsic Q; q_ext may be +inf.
Resonance make_resonance(double center_wavelength_m, double q_int, double q_ext, double extinction_db,
                         CouplingBranch branch);

// Forward model: the resonance a (t, a) ring presents. Extinction is capped at
// -10 log10(transmission_floor).
Resonance resonance_from_coupling(double t, double a, const DeviceConfig& config,
                                  double transmission_floor = 1e-4);

// Self-coupling amplitude that produces the given Γ/M with the config's round-trip loss.
double self_coupling_for_ratio(double gamma_over_m, const DeviceConfig& config);

struct PhaseAnchor
{
    double volts = 0.0;
    double gamma_over_m = 1.0;
};

// Solves phase_offset_rad and phase_per_volt_sq so that both anchors are hit
// on the 0 <= phi <= pi branch. Returns the updated config.
DeviceConfig calibrate_phase(DeviceConfig config, PhaseAnchor first, PhaseAnchor second);

// Critical coupling at 1.45 V and the measured brightness peak Γ = 4.7M at 1.85 V.
DeviceConfig calibrate_phase(DeviceConfig config);

} // namespace mrr
