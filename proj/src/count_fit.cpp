#include "mrr/count_fit.hpp"

#include "mrr/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <memory>

namespace mrr {

namespace {

enum Phys : std::size_t
{
    kEtaS,
    kEtaI,
    kGamma,
    kBetaS,
    kBetaI,
    kDelta,
    kDcS,
    kDcI,
};

// Maps each physical parameter onto its slot in the fitted vector.
std::array<Eigen::Index, kCountParamCount> layout(CountFitMode mode)
{
    if (mode == CountFitMode::SharedBeta)
        return {0, 1, 2, 3, 3, 4, 5, 6};
    return {0, 1, 2, 3, 4, 5, 6, 7};
}

Eigen::Index slot_count(CountFitMode mode)
{
    return mode == CountFitMode::SharedBeta ? 7 : 8;
}

struct CountData
{
    std::vector<CountRow> rows;
    std::vector<double> acc; // per-row accidentals from the measured singles
};

} // namespace

std::string_view to_string(CountFitMode mode)
{
    switch (mode) {
    case CountFitMode::Full:
        return "full";
    case CountFitMode::LowPowerLinearized:
        return "low-power";
    case CountFitMode::SharedBeta:
        return "shared-beta";
    }
    return "full";
}

CountFitMode parse_count_fit_mode(std::string_view text)
{
    if (text == "full")
        return CountFitMode::Full;
    if (text == "low-power" || text == "low_power" || text == "low_power_linearized")
        return CountFitMode::LowPowerLinearized;
    if (text == "shared-beta" || text == "shared_beta")
        return CountFitMode::SharedBeta;
    throw InputError(fmt::format("unknown fit mode '{}' (expected full, low-power or shared-beta)", text));
}

std::vector<std::string> count_parameter_names()
{
    return {"eta_s", "eta_i", "gamma_eff", "beta_s", "beta_i", "delta", "dc_s", "dc_i"};
}

SfwmParams unpack_count_params(const Eigen::VectorXd& values, CountFitMode mode)
{
    const auto map = layout(mode);
    if (values.size() != slot_count(mode))
        throw InputError("count parameter vector has the wrong length for the fit mode");
    SfwmParams p;
    p.eta_s = values[map[kEtaS]];
    p.eta_i = values[map[kEtaI]];
    p.gamma_eff = values[map[kGamma]];
    p.beta_s = values[map[kBetaS]];
    p.beta_i = values[map[kBetaI]];
    p.delta = values[map[kDelta]];
    p.dc_s = values[map[kDcS]];
    p.dc_i = values[map[kDcI]];
    return p;
}

FitProblem build_count_problem(const std::vector<CountRow>& rows, const DeviceConfig& config, CountFitMode mode,
                               const CountFitOptions& options)
{
    if (rows.empty())
        throw InputError("count sweep is empty");
    const AccidentalModel acc_model = options.accidentals.value_or(AccidentalModel::pulsed(config.rep_rate_hz));
    auto data = std::make_shared<CountData>();
    data->rows = rows;
    for (const CountRow& row : rows)
        data->acc.push_back(accidentals(row.c_s, row.c_i, acc_model));

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto map = layout(mode);
    const Eigen::Index slots = slot_count(mode);

    FitProblem problem;
    problem.residuals = [data, mode](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        const SfwmParams p = unpack_count_params(v, mode);
        const auto m = static_cast<Eigen::Index>(data->rows.size());
        Eigen::VectorXd r(3 * m);
        for (Eigen::Index k = 0; k < m; ++k) {
            const CountRow& row = data->rows[static_cast<std::size_t>(k)];
            const double t = row.integration_s;
            r[k] = (singles_rate(p, row.power_mw, Arm::Signal) - row.c_s) * t;
            r[m + k] = (singles_rate(p, row.power_mw, Arm::Idler) - row.c_i) * t;
            r[2 * m + k] =
                (pair_coincidence_rate(p, row.power_mw) + data->acc[static_cast<std::size_t>(k)] - row.cc) * t;
        }
        return r;
    };
    problem.jacobian = [data, mode, map, slots](const Eigen::VectorXd& v) -> Eigen::MatrixXd {
        const SfwmParams p = unpack_count_params(v, mode);
        const auto m = static_cast<Eigen::Index>(data->rows.size());
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * m, slots);
        for (Eigen::Index k = 0; k < m; ++k) {
            const CountRow& row = data->rows[static_cast<std::size_t>(k)];
            const double t = row.integration_s;
            const double pw = row.power_mw;
            const double p2 = pw * pw;
            const double f = 1.0 - p.delta * p2;
            const double gen_s = p.gamma_eff * p2 + p.beta_s * pw;
            const double gen_i = p.gamma_eff * p2 + p.beta_i * pw;

            jac(k, map[kEtaS]) += gen_s * f * t;
            jac(k, map[kGamma]) += p.eta_s * p2 * f * t;
            jac(k, map[kBetaS]) += p.eta_s * pw * f * t;
            jac(k, map[kDelta]) += -p.eta_s * gen_s * p2 * t;
            jac(k, map[kDcS]) += t;

            jac(m + k, map[kEtaI]) += gen_i * f * t;
            jac(m + k, map[kGamma]) += p.eta_i * p2 * f * t;
            jac(m + k, map[kBetaI]) += p.eta_i * pw * f * t;
            jac(m + k, map[kDelta]) += -p.eta_i * gen_i * p2 * t;
            jac(m + k, map[kDcI]) += t;

            const double pair = p.gamma_eff * p2 * f;
            jac(2 * m + k, map[kEtaS]) += p.eta_i * pair * t;
            jac(2 * m + k, map[kEtaI]) += p.eta_s * pair * t;
            jac(2 * m + k, map[kGamma]) += p.eta_s * p.eta_i * p2 * f * t;
            jac(2 * m + k, map[kDelta]) += -p.eta_s * p.eta_i * p.gamma_eff * p2 * p2 * t;
        }
        return jac;
    };

    problem.weights.resize(3 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const CountRow& row = rows[static_cast<std::size_t>(k)];
        const double t = row.integration_s;
        problem.weights[k] = 1.0 / std::max(row.c_s * t, 1.0);
        problem.weights[n + k] = 1.0 / std::max(row.c_i * t, 1.0);
        problem.weights[2 * n + k] = 1.0 / std::max(row.cc * t, 1.0);
    }

    // Data-driven starting point: dark counts from the lowest-power row, delta
    // from the curvature of CC/P², then two-point quadratics on the
    // background-subtracted singles corrected by (1 - delta P²).
    const CountRow& first = rows.front();
    const CountRow& last = rows.back();
    const std::size_t mid_index = rows.size() / 2;
    const CountRow& mid = rows[mid_index];
    const double dc_s = first.c_s;
    const double dc_i = first.c_i;
    const double p_max = last.power_mw;
    const double delta_max = (1.0 - 1e-9) / (p_max * p_max);
    const bool pin_delta = mode == CountFitMode::LowPowerLinearized;

    auto pair_quad = [&](std::size_t k) {
        const double pw = rows[k].power_mw;
        return pw > 0.0 ? (rows[k].cc - data->acc[k]) / (pw * pw) : 0.0;
    };
    const double q_last = pair_quad(rows.size() - 1);
    const double q_mid = pair_quad(mid_index);
    double delta = 0.0;
    if (!pin_delta) {
        const double denom = q_mid * p_max * p_max - q_last * mid.power_mw * mid.power_mw;
        delta = denom > 0.0 ? (q_mid - q_last) / denom : 0.0;
        delta = std::clamp(delta, 0.05 * delta_max, 0.9 * delta_max);
    }
    auto loss = [&](double pw) { return 1.0 - delta * pw * pw; };

    struct Quadratic
    {
        double linear, quadratic;
    };
    auto two_point = [&](double y_mid, double y_last) -> Quadratic {
        const double pm = mid.power_mw;
        const double pl = last.power_mw;
        y_mid /= loss(pm);
        y_last /= loss(pl);
        double a2 = 0.0;
        double a1 = 0.0;
        if (pl > pm && pm > 0.0) {
            a2 = (y_last / pl - y_mid / pm) / (pl - pm);
            a1 = y_mid / pm - a2 * pm;
        }
        if (!(a2 > 0.0)) {
            a2 = std::max(y_last, 1.0 / last.integration_s) / (pl * pl);
            a1 = 0.0;
        }
        return {std::max(a1, 0.0), a2};
    };
    const Quadratic qs = two_point(mid.c_s - dc_s, last.c_s - dc_s);
    const Quadratic qi = two_point(mid.c_i - dc_i, last.c_i - dc_i);

    double cc_quad = q_last / loss(p_max);
    if (mid.power_mw > 0.0)
        cc_quad = 0.5 * (cc_quad + q_mid / loss(mid.power_mw));
    if (!(cc_quad > 0.0))
        throw ModelError("coincidence counts carry no signal above accidentals; eta and gamma_eff are not "
                         "separately identifiable from singles alone");

    const double eta_s = std::clamp(cc_quad / qi.quadratic, 1e-3, 1.0);
    const double eta_i = std::clamp(cc_quad / qs.quadratic, 1e-3, 1.0);
    const double gamma = std::sqrt(qs.quadratic / eta_s * qi.quadratic / eta_i);
    // Rate parameters start off their zero bound so the transform has slope.
    const double beta_floor = 1e-3 * gamma * p_max;
    const double beta_s = std::max(qs.linear / eta_s, beta_floor);
    const double beta_i = std::max(qi.linear / eta_i, beta_floor);
    const double dc_floor = 1.0 / first.integration_s;

    const double inf = std::numeric_limits<double>::infinity();

    std::vector<ParameterSpec> specs(static_cast<std::size_t>(slots));
    auto set = [&](Phys which, std::string name, double init, double lo, double hi, bool fixed = false) {
        specs[static_cast<std::size_t>(map[which])] = {std::move(name), std::clamp(init, lo, hi), lo, hi, fixed};
    };
    set(kEtaS, "eta_s", eta_s, 0.0, 1.5);
    set(kEtaI, "eta_i", eta_i, 0.0, 1.5);
    set(kGamma, "gamma_eff", gamma, 0.0, inf);
    if (mode == CountFitMode::SharedBeta)
        set(kBetaS, "beta", 0.5 * (beta_s + beta_i), 0.0, inf);
    else {
        set(kBetaS, "beta_s", beta_s, 0.0, inf);
        set(kBetaI, "beta_i", beta_i, 0.0, inf);
    }
    if (pin_delta)
        set(kDelta, "delta", 0.0, 0.0, 0.0, true);
    else
        set(kDelta, "delta", delta, 0.0, delta_max);
    set(kDcS, "dc_s", std::max(dc_s, dc_floor), 0.0, inf);
    set(kDcI, "dc_i", std::max(dc_i, dc_floor), 0.0, inf);
    problem.parameters = std::move(specs);
    problem.settings = options.settings;
    return problem;
}

SfwmFit fit_counts(const CountSweep& sweep, const DeviceConfig& config, CountFitMode mode,
                   const CountFitOptions& options)
{
    CountSweep sorted = sweep;
    std::sort(sorted.rows.begin(), sorted.rows.end(),
              [](const CountRow& a, const CountRow& b) { return a.power_mw < b.power_mw; });
    validate(sorted);

    SfwmFit out;
    out.mode = mode;
    std::vector<CountRow> rows = sorted.rows;
    if (mode == CountFitMode::LowPowerLinearized) {
        std::vector<CountRow> low;
        std::copy_if(rows.begin(), rows.end(), std::back_inserter(low),
                     [&](const CountRow& r) { return r.power_mw <= options.low_power_max_mw; });
        if (low.size() < 3) {
            out.warnings.push_back(fmt::format("low-power mode: only {} rows at or below {} mW; fitting all {} rows "
                                               "with delta pinned to 0",
                                               low.size(), options.low_power_max_mw, rows.size()));
        } else {
            rows = std::move(low);
        }
    }

    const std::size_t needed = mode == CountFitMode::LowPowerLinearized ? 3 : 6;
    if (rows.size() < needed)
        throw InputError(fmt::format("{} mode needs at least {} power points, got {}", to_string(mode), needed,
                                     rows.size()));
    if (std::all_of(rows.begin(), rows.end(), [](const CountRow& r) { return r.cc == 0.0; }))
        throw ModelError("coincidence column is all zero; eta and gamma_eff cannot be separated from singles alone");

    const FitProblem problem = build_count_problem(rows, config, mode, options);
    out.fit = least_squares(problem);
    out.rows_used = rows.size();
    out.params = unpack_count_params(out.fit.estimates, mode);
    out.sigmas = unpack_count_params(out.fit.sigmas, mode);
    if (!out.fit.converged)
        out.warnings.push_back(fmt::format("fit did not converge after {} iterations", out.fit.iterations));

    auto intrinsic = [&](double eta, double sigma, Arm arm) {
        IntrinsicEstimate est;
        const double budget = loss_budget(config, arm);
        est.value = intrinsic_heralding(eta, arm, config);
        est.sigma_fit = sigma / budget;
        est.sigma_loss = est.value * options.loss_budget_rel_sigma;
        est.sigma_total = std::hypot(est.sigma_fit, est.sigma_loss);
        est.exceeds_unity = est.value > 1.0;
        if (est.exceeds_unity)
            out.warnings.push_back(
                fmt::format("intrinsic {} heralding efficiency {:.4f} exceeds 1", to_string(arm), est.value));
        return est;
    };
    out.intrinsic_s = intrinsic(out.params.eta_s, out.sigmas.eta_s, Arm::Signal);
    out.intrinsic_i = intrinsic(out.params.eta_i, out.sigmas.eta_i, Arm::Idler);
    return out;
}

} // namespace mrr
