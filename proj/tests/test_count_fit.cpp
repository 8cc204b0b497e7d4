#include "mrr/count_fit.hpp"
#include "mrr/error.hpp"
#include "mrr/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace mrr;
using doctest::Approx;

namespace {

void check_all_close(const SfwmParams& fit, const SfwmParams& truth, double tol)
{
    CHECK(test::rel_err(fit.eta_s, truth.eta_s) < tol);
    CHECK(test::rel_err(fit.eta_i, truth.eta_i) < tol);
    CHECK(test::rel_err(fit.gamma_eff, truth.gamma_eff) < tol);
    CHECK(test::rel_err(fit.beta_s, truth.beta_s) < tol);
    CHECK(test::rel_err(fit.beta_i, truth.beta_i) < tol);
    CHECK(test::rel_err(fit.delta, truth.delta) < tol);
    CHECK(test::rel_err(fit.dc_s, truth.dc_s) < tol);
    CHECK(test::rel_err(fit.dc_i, truth.dc_i) < tol);
}

} // namespace

TEST_SUITE("count-fit")
{
    TEST_CASE("mode names")
    {
        CHECK(parse_count_fit_mode("full") == CountFitMode::Full);
        CHECK(parse_count_fit_mode("low-power") == CountFitMode::LowPowerLinearized);
        CHECK(parse_count_fit_mode("low_power") == CountFitMode::LowPowerLinearized);
        CHECK(parse_count_fit_mode("shared-beta") == CountFitMode::SharedBeta);
        CHECK_THROWS_AS(parse_count_fit_mode("fast"), InputError);
        CHECK(to_string(CountFitMode::SharedBeta) == "shared-beta");
    }

    TEST_CASE("noiseless sweep is recovered exactly")
    {
        DeviceConfig c;
        SynthSpec spec = test::reference_spec(0);
        spec.noiseless = true;
        const SfwmFit full = fit_counts(gen_count_sweep(spec, c), c, CountFitMode::Full);
        check_all_close(full.params, spec.truth, 1e-6);

        const SfwmFit shared = fit_counts(gen_count_sweep(spec, c), c, CountFitMode::SharedBeta);
        check_all_close(shared.params, spec.truth, 1e-6);
        CHECK(shared.params.beta_s == shared.params.beta_i);
        CHECK(shared.fit.names.size() == 7);
    }

    TEST_CASE("noisy sweeps recover eta and gamma within 5%")
    {
        DeviceConfig c;
        for (std::uint64_t seed = 100; seed < 105; ++seed) {
            const SynthSpec spec = test::reference_spec(seed);
            const SfwmFit fit = fit_counts(gen_count_sweep(spec, c), c, CountFitMode::Full);
            CHECK(fit.fit.converged);
            CHECK(test::rel_err(fit.params.eta_s, spec.truth.eta_s) < 0.05);
            CHECK(test::rel_err(fit.params.eta_i, spec.truth.eta_i) < 0.05);
            CHECK(test::rel_err(fit.params.gamma_eff, spec.truth.gamma_eff) < 0.05);
            CHECK(fit.sigmas.eta_s > 0.0);
        }
    }

    TEST_CASE("row order does not change the fit")
    {
        DeviceConfig c;
        const CountSweep sweep = gen_count_sweep(test::reference_spec(7), c);
        CountSweep shuffled = sweep;
        std::mt19937_64 rng(1);
        std::shuffle(shuffled.rows.begin(), shuffled.rows.end(), rng);
        const SfwmFit a = fit_counts(sweep, c, CountFitMode::Full);
        const SfwmFit b = fit_counts(shuffled, c, CountFitMode::Full);
        CHECK(a.fit.estimates == b.fit.estimates);
        CHECK(a.fit.sigmas == b.fit.sigmas);
    }

    TEST_CASE("low-power mode on truncated data has small gamma bias")
    {
        DeviceConfig c;
        SynthSpec spec = test::reference_spec(0);
        spec.truth.delta = 0.1;
        spec.noiseless = true;
        spec.powers_mw = {0.005, 0.01, 0.015, 0.02, 0.03, 0.04, 0.05, 0.1, 0.2, 0.5};
        const SfwmFit fit = fit_counts(gen_count_sweep(spec, c), c, CountFitMode::LowPowerLinearized);
        CHECK(fit.rows_used == 7);
        CHECK(fit.params.delta == 0.0);
        CHECK(test::rel_err(fit.params.gamma_eff, spec.truth.gamma_eff) < 0.01);
        CHECK(std::none_of(fit.warnings.begin(), fit.warnings.end(),
                           [](const std::string& w) { return w.find("low-power") != std::string::npos; }));
    }

    TEST_CASE("low-power mode without low rows warns and proceeds")
    {
        DeviceConfig c;
        SynthSpec spec = test::reference_spec(4);
        spec.truth.delta = 0.1;
        const SfwmFit fit = fit_counts(gen_count_sweep(spec, c), c, CountFitMode::LowPowerLinearized);
        CHECK(fit.params.delta == 0.0);
        CHECK(fit.rows_used == 10);
        REQUIRE_FALSE(fit.warnings.empty());
        CHECK(fit.warnings.front().find("low-power") != std::string::npos);
    }

    TEST_CASE("too few points and missing coincidences")
    {
        DeviceConfig c;
        SynthSpec spec = test::reference_spec(1, 5);
        CHECK_THROWS_AS(fit_counts(gen_count_sweep(spec, c), c, CountFitMode::Full), InputError);

        CountSweep no_cc = gen_count_sweep(test::reference_spec(1), c);
        for (auto& r : no_cc.rows)
            r.cc = 0.0;
        CHECK_THROWS_AS(fit_counts(no_cc, c, CountFitMode::Full), ModelError);
    }

    TEST_CASE("closed-form heralding estimate agrees with the fit")
    {
        DeviceConfig c;
        SynthSpec spec = test::reference_spec(31);
        spec.integration_s = 100.0;
        const CountSweep sweep = gen_count_sweep(spec, c);
        const SfwmFit fit = fit_counts(sweep, c, CountFitMode::Full);
        const SfwmParams& p = fit.params;
        const CountRow& row = sweep.rows.back();
        const double f = 1.0 - p.delta * row.power_mw * row.power_mw;
        // Background-corrected CC / C_s.
        const double pairs = row.cc - accidentals(row.c_s, row.c_i, c.rep_rate_hz);
        const double signal_pairs = row.c_s - p.dc_s - p.eta_s * p.beta_s * row.power_mw * f;
        const double eta_i = pairs / signal_pairs;
        const double sigma = std::hypot(fit.sigmas.eta_i, eta_i / std::sqrt(pairs * row.integration_s));
        CHECK(std::abs(eta_i - p.eta_i) < 3.0 * sigma);
    }

    TEST_CASE("intrinsic estimates and flags")
    {
        DeviceConfig c;
        SynthSpec spec = test::reference_spec(2);
        spec.noiseless = true;
        spec.truth.eta_s = 0.19;
        spec.truth.eta_i = 0.17;
        CountFitOptions opts;
        opts.loss_budget_rel_sigma = 0.05;
        const SfwmFit fit = fit_counts(gen_count_sweep(spec, c), c, CountFitMode::Full, opts);
        CHECK(fit.intrinsic_s.value == Approx(0.19 / loss_budget(c, Arm::Signal)).epsilon(1e-6));
        CHECK(fit.intrinsic_s.exceeds_unity);
        CHECK_FALSE(fit.intrinsic_i.exceeds_unity);
        CHECK(fit.intrinsic_s.sigma_loss == Approx(0.05 * fit.intrinsic_s.value));
        CHECK(fit.intrinsic_s.sigma_total ==
              Approx(std::hypot(fit.intrinsic_s.sigma_fit, fit.intrinsic_s.sigma_loss)));
        CHECK(std::any_of(fit.warnings.begin(), fit.warnings.end(),
                          [](const std::string& w) { return w.find("exceeds 1") != std::string::npos; }));
    }

    TEST_CASE("continuous-wave accidentals option")
    {
        DeviceConfig c;
        SynthSpec spec = test::reference_spec(0);
        spec.noiseless = true;
        CountSweep sweep = gen_count_sweep(spec, c);
        const AccidentalModel cw = AccidentalModel::continuous(2e-9);
        for (auto& r : sweep.rows)
            r.cc = pair_coincidence_rate(spec.truth, r.power_mw) + accidentals(r.c_s, r.c_i, cw);
        CountFitOptions opts;
        opts.accidentals = cw;
        const SfwmFit fit = fit_counts(sweep, c, CountFitMode::Full, opts);
        check_all_close(fit.params, spec.truth, 1e-6);
    }
}
