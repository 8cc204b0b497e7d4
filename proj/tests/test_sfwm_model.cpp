#include "mrr/error.hpp"
#include "mrr/sfwm_model.hpp"
#include "mrr/theory.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace mrr;
using doctest::Approx;

namespace {

SfwmParams unit_params()
{
    SfwmParams p;
    p.eta_s = 1.0;
    p.eta_i = 1.0;
    p.gamma_eff = 1e6;
    return p;
}

} // namespace

TEST_SUITE("sfwm-model")
{
    TEST_CASE("singles_rate")
    {
        SfwmParams p = test::reference_truth();
        CHECK(singles_rate(p, 0.0, Arm::Signal) == Approx(p.dc_s));
        CHECK(singles_rate(p, 0.0, Arm::Idler) == Approx(p.dc_i));

        const SfwmParams u = unit_params();
        CHECK(singles_rate(u, 1.0, Arm::Signal) == Approx(1e6));

        SfwmParams d = u;
        d.delta = 0.1;
        CHECK(singles_rate(d, 1.0, Arm::Signal) == Approx(0.9e6));

        SfwmParams out_of_window = u;
        out_of_window.delta = 1.0;
        CHECK_THROWS_AS(singles_rate(out_of_window, 1.0, Arm::Signal), ModelError);
        CHECK_THROWS_AS(coincidence_rate(out_of_window, 1.5, 50e6), ModelError);
    }

    TEST_CASE("coincidence_rate")
    {
        SfwmParams p = unit_params();
        p.eta_s = 0.0;
        p.eta_i = 0.0;
        CHECK(coincidence_rate(p, 0.0, 50e6) == 0.0);

        SfwmParams u = unit_params();
        // ACC ≈ 0 with an effectively infinite repetition rate.
        CHECK(coincidence_rate(u, 1.0, 1e300) == Approx(1e6));
        u.eta_s = 0.2;
        u.eta_i = 0.18;
        CHECK(coincidence_rate(u, 1.0, 1e300) == Approx(3.6e4));
        CHECK(pair_coincidence_rate(u, 1.0) == Approx(3.6e4));
    }

    TEST_CASE("accidentals")
    {
        CHECK(accidentals(0.0, 0.0, 50e6) == 0.0);
        CHECK(accidentals(1e5, 1e5, 5e7) == Approx(200.0));
        CHECK(accidentals(2e5, 2e5, 5e7) == Approx(4.0 * accidentals(1e5, 1e5, 5e7)));
        CHECK(accidentals(3e4, 7e4, 5e7) == accidentals(7e4, 3e4, 5e7));
        CHECK(accidentals(1e5, 1e5, AccidentalModel::pulsed(5e7)) == Approx(200.0));
        CHECK(accidentals(1e5, 1e5, AccidentalModel::continuous(1e-9)) == Approx(10.0));
    }

    TEST_CASE("loss_budget and intrinsic_heralding")
    {
        DeviceConfig c;
        CHECK(loss_budget(c, Arm::Idler) == Approx(0.18132).epsilon(1e-4));
        CHECK(loss_budget(c, Arm::Signal) == Approx(0.18285).epsilon(1e-4));
        CHECK(intrinsic_heralding(0.17736, Arm::Idler, c) == Approx(0.9787).epsilon(1e-3));
        CHECK(intrinsic_heralding(loss_budget(c, Arm::Signal), Arm::Signal, c) == Approx(1.0));
        // Signal divisor uses the signal channel efficiency.
        CHECK(intrinsic_heralding(0.1, Arm::Signal, c) == Approx(0.1 / (0.582 * 0.357 * 0.88)));

        DeviceConfig unity = c;
        unity.eta_gc = unity.eta_det = unity.eta_channel_s = unity.eta_channel_i = 1.0;
        CHECK(loss_budget(unity, Arm::Signal) == 1.0);

        DeviceConfig zero = c;
        zero.eta_det = 0.0;
        CHECK_THROWS_AS(intrinsic_heralding(0.1, Arm::Idler, zero), InputError);

        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int k = 0; k < 200; ++k) {
            const double eta = u(rng);
            for (Arm arm : {Arm::Signal, Arm::Idler})
                CHECK(std::abs(intrinsic_heralding(eta * loss_budget(c, arm), arm, c) / eta - 1.0) < 1e-12);
        }
    }

    TEST_CASE("turnover power of the pure SFWM term")
    {
        for (double delta : {0.1, 0.5, 1.0, 3.0}) {
            SfwmParams p = unit_params();
            p.delta = delta;
            const double p_max = std::sqrt(1.0 / delta);
            const MaximumResult best = golden_section_maximize(
                [&](double pw) { return pair_coincidence_rate(p, pw); }, 0.0, p_max * (1.0 - 1e-12));
            CHECK(sfwm_turnover_power(delta) == Approx(std::sqrt(1.0 / (2.0 * delta))));
            CHECK(test::rel_err(best.x, sfwm_turnover_power(delta)) < 1e-3);
        }
    }

    TEST_CASE("rates are monotone below the turnover")
    {
        SfwmParams p = test::reference_truth();
        const double p_star = sfwm_turnover_power(p.delta);
        double prev_s = -1.0;
        double prev_c = -1.0;
        for (int k = 0; k < 200; ++k) {
            const double pw = p_star * 0.9 * k / 199.0;
            const double s = singles_rate(p, pw, Arm::Signal);
            const double c = coincidence_rate(p, pw, 50e6);
            CHECK(s >= prev_s);
            CHECK(c >= prev_c);
            prev_s = s;
            prev_c = c;
        }
    }

    TEST_CASE("pair rate consistency without background")
    {
        SfwmParams p = unit_params();
        p.eta_s = 0.3;
        p.eta_i = 0.2;
        for (double pw : {0.01, 0.1, 1.0, 3.0}) {
            const double cs = singles_rate(p, pw, Arm::Signal);
            const double ci = singles_rate(p, pw, Arm::Idler);
            const double cc = pair_coincidence_rate(p, pw);
            CHECK(cc * p.gamma_eff * pw * pw / (cs * ci) == Approx(1.0).epsilon(1e-14));
        }
    }

    TEST_CASE("coincidences never exceed singles on random draws")
    {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        int checked = 0;
        for (int k = 0; k < 4000; ++k) {
            SfwmParams p;
            p.eta_s = u(rng);
            p.eta_i = u(rng);
            p.gamma_eff = 1e7 * u(rng);
            p.beta_s = 1e5 * u(rng);
            p.beta_i = 1e5 * u(rng);
            p.delta = 2.0 * u(rng);
            p.dc_s = 1e3 * u(rng);
            p.dc_i = 1e3 * u(rng);
            const double pw = 0.6 * u(rng);
            const double cs = singles_rate(p, pw, Arm::Signal);
            const double ci = singles_rate(p, pw, Arm::Idler);
            const double acc = accidentals(cs, ci, 50e6);
            if (acc > std::min(p.dc_s, p.dc_i))
                continue;
            ++checked;
            CHECK(coincidence_rate(p, pw, 50e6) <= std::min(cs, ci) * (1.0 + 1e-12));
        }
        CHECK(checked > 1000);
    }

    TEST_CASE("accidentals bounded only by dark-count-free singles can push coincidences above singles")
    {
        SfwmParams p;
        p.eta_s = 0.9;
        p.eta_i = 1.0;
        p.gamma_eff = 1e7;
        p.beta_s = p.beta_i = 0.0;
        p.delta = 0.0;
        p.dc_s = p.dc_i = 0.0;
        const double pw = 0.5;
        const double cs = singles_rate(p, pw, Arm::Signal);
        const double ci = singles_rate(p, pw, Arm::Idler);
        CHECK(accidentals(cs, ci, 50e6) <= std::min(cs, ci));
        CHECK(coincidence_rate(p, pw, 50e6) > cs);
    }

    TEST_CASE("sweep validation names the row")
    {
        CountSweep s;
        s.rows = {{0.1, 1, 100, 100, 10}, {0.2, 1, 200, 150, 160}};
        try {
            validate(s);
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("row 2") != std::string::npos);
            CHECK(std::string(e.what()).find("cc") != std::string::npos);
        }
        s.rows = {{0.2, 1, 100, 100, 10}, {0.1, 1, 200, 150, 10}};
        CHECK_THROWS_AS(validate(s), InputError);
    }
}
