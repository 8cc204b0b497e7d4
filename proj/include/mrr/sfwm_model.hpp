#pragma once

#include "mrr/ring_model.hpp"

#include <string_view>
#include <vector>

namespace mrr {

enum class Arm
{
    Signal,
    Idler,
};

std::string_view to_string(Arm arm);

// gamma_eff is stored in pairs/s/mW²; divide by kPairsPerMpair for reports.
inline constexpr double kPairsPerMpair = 1e6;

struct SfwmParams
{
    double eta_s = 0.0;
    double eta_i = 0.0;
    double gamma_eff = 0.0; // pairs/s/mW²
    double beta_s = 0.0;    // pairs/s/mW
    double beta_i = 0.0;
    double delta = 0.0;     // mW⁻²
    double dc_s = 0.0;      // counts/s
    double dc_i = 0.0;
};

// Throws InputError when a field is negative or an efficiency leaves [0, 1].
void validate(const SfwmParams& params);

struct CountRow
{
    double power_mw = 0.0;
    double integration_s = 1.0;
    double c_s = 0.0;
    double c_i = 0.0;
    double cc = 0.0;
};

struct CountSweep
{
    std::vector<CountRow> rows;
};

// Powers strictly increasing and >= 0, counts >= 0, cc <= min(c_s, c_i).
// Messages name the 1-based data row.
void validate(const CountSweep& sweep);

struct AccidentalModel
{
    enum class Kind
    {
        Pulsed,
        ContinuousWave,
    };

    Kind kind = Kind::Pulsed;
    double rep_rate_hz = 50e6;
    double window_s = 1e-9;

    static AccidentalModel pulsed(double rep_rate_hz) { return {Kind::Pulsed, rep_rate_hz, 0.0}; }
    static AccidentalModel continuous(double window_s) { return {Kind::ContinuousWave, 0.0, window_s}; }
};

// Pulsed estimator: one uncorrelated pair of clicks per pulse, c_s c_i / R.
double accidentals(double c_s, double c_i, double rep_rate_hz);
double accidentals(double c_s, double c_i, const AccidentalModel& model);

// (1 - delta P²); throws ModelError outside the validity window.
double nonlinear_loss_factor(const SfwmParams& params, double power_mw);

double singles_rate(const SfwmParams& params, double power_mw, Arm arm);
// Correlated pairs only: eta_s eta_i gamma P² (1 - delta P²).
double pair_coincidence_rate(const SfwmParams& params, double power_mw);
double coincidence_rate(const SfwmParams& params, double power_mw, double rep_rate_hz);
double coincidence_rate(const SfwmParams& params, double power_mw, const AccidentalModel& model);

// Power at which P²(1 - delta P²) peaks.
double sfwm_turnover_power(double delta);

// eta_gc * eta_channel(arm) * eta_det.
double loss_budget(const DeviceConfig& config, Arm arm);
// eta_extrinsic / loss_budget. Not clamped; values above 1 are possible within uncertainty.
double intrinsic_heralding(double eta_extrinsic, Arm arm, const DeviceConfig& config);

} // namespace mrr
