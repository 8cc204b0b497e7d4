#include "mrr/sfwm_model.hpp"

#include "mrr/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace mrr {

std::string_view to_string(Arm arm)
{
    return arm == Arm::Signal ? "signal" : "idler";
}

void validate(const SfwmParams& p)
{
    auto nonneg = [](double v, std::string_view name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InputError(fmt::format("parameter '{}' = {} must be finite and >= 0", name, v));
    };
    nonneg(p.eta_s, "eta_s");
    nonneg(p.eta_i, "eta_i");
    nonneg(p.gamma_eff, "gamma_eff");
    nonneg(p.beta_s, "beta_s");
    nonneg(p.beta_i, "beta_i");
    nonneg(p.delta, "delta");
    nonneg(p.dc_s, "dc_s");
    nonneg(p.dc_i, "dc_i");
    if (p.eta_s > 1.0 || p.eta_i > 1.0)
        throw InputError("extrinsic heralding efficiencies must not exceed 1");
}

void validate(const CountSweep& sweep)
{
    for (std::size_t k = 0; k < sweep.rows.size(); ++k) {
        const CountRow& row = sweep.rows[k];
        const std::size_t n = k + 1;
        auto finite_nonneg = [&](double v, std::string_view field) {
            if (!std::isfinite(v) || v < 0.0)
                throw InputError(fmt::format("row {}: field '{}' = {} must be finite and >= 0", n, field, v));
        };
        finite_nonneg(row.power_mw, "power_mw");
        finite_nonneg(row.c_s, "c_s");
        finite_nonneg(row.c_i, "c_i");
        finite_nonneg(row.cc, "cc");
        if (!(row.integration_s > 0.0) || !std::isfinite(row.integration_s))
            throw InputError(fmt::format("row {}: field 'integration_s' = {} must be > 0", n, row.integration_s));
        if (row.cc > std::min(row.c_s, row.c_i))
            throw InputError(fmt::format("row {}: field 'cc' = {} exceeds min(c_s, c_i) = {}", n, row.cc,
                                         std::min(row.c_s, row.c_i)));
        if (k > 0 && !(row.power_mw > sweep.rows[k - 1].power_mw))
            throw InputError(fmt::format("row {}: field 'power_mw' = {} is not strictly increasing", n, row.power_mw));
    }
}

double accidentals(double c_s, double c_i, double rep_rate_hz)
{
    if (!(rep_rate_hz > 0.0))
        throw InputError("repetition rate must be > 0");
    return std::max(c_s, 0.0) * std::max(c_i, 0.0) / rep_rate_hz;
}

double accidentals(double c_s, double c_i, const AccidentalModel& model)
{
    if (model.kind == AccidentalModel::Kind::Pulsed)
        return accidentals(c_s, c_i, model.rep_rate_hz);
    if (!(model.window_s >= 0.0))
        throw InputError("coincidence window must be >= 0");
    return std::max(c_s, 0.0) * std::max(c_i, 0.0) * model.window_s;
}

double nonlinear_loss_factor(const SfwmParams& params, double power_mw)
{
    if (power_mw < 0.0)
        throw InputError(fmt::format("pump power {} mW must be >= 0", power_mw));
    const double loss = params.delta * power_mw * power_mw;
    if (loss >= 1.0)
        throw ModelError(fmt::format("delta P² = {} >= 1 at P = {} mW: outside the model validity window", loss,
                                     power_mw));
    return 1.0 - loss;
}

double singles_rate(const SfwmParams& params, double power_mw, Arm arm)
{
    const double f = nonlinear_loss_factor(params, power_mw);
    const bool sig = arm == Arm::Signal;
    const double eta = sig ? params.eta_s : params.eta_i;
    const double beta = sig ? params.beta_s : params.beta_i;
    const double dc = sig ? params.dc_s : params.dc_i;
    return eta * (params.gamma_eff * power_mw * power_mw + beta * power_mw) * f + dc;
}

double pair_coincidence_rate(const SfwmParams& params, double power_mw)
{
    const double f = nonlinear_loss_factor(params, power_mw);
    return params.eta_s * params.eta_i * params.gamma_eff * power_mw * power_mw * f;
}

double coincidence_rate(const SfwmParams& params, double power_mw, const AccidentalModel& model)
{
    const double acc = accidentals(singles_rate(params, power_mw, Arm::Signal),
                                   singles_rate(params, power_mw, Arm::Idler), model);
    return pair_coincidence_rate(params, power_mw) + acc;
}

double coincidence_rate(const SfwmParams& params, double power_mw, double rep_rate_hz)
{
    return coincidence_rate(params, power_mw, AccidentalModel::pulsed(rep_rate_hz));
}

double sfwm_turnover_power(double delta)
{
    if (!(delta > 0.0))
        throw InputError("turnover power needs delta > 0");
    return std::sqrt(1.0 / (2.0 * delta));
}

double loss_budget(const DeviceConfig& config, Arm arm)
{
    const double channel = arm == Arm::Signal ? config.eta_channel_s : config.eta_channel_i;
    return config.eta_gc * channel * config.eta_det;
}

double intrinsic_heralding(double eta_extrinsic, Arm arm, const DeviceConfig& config)
{
    const double budget = loss_budget(config, arm);
    if (!(budget > 0.0))
        throw InputError(fmt::format("{} loss budget is zero; cannot invert to intrinsic efficiency", to_string(arm)));
    return eta_extrinsic / budget;
}

} // namespace mrr
