#include "mrr/error.hpp"
#include "mrr/resonance_fit.hpp"
#include "mrr/synth.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace mrr;
using doctest::Approx;

TEST_SUITE("resonance-fit")
{
    TEST_CASE("noiseless under-coupled trace round-trips")
    {
        DeviceConfig c;
        const double a = round_trip_amplitude(c);
        const ResonanceTrace trace = gen_resonance_trace(0.99, a, c);
        const Resonance truth = resonance_from_coupling(0.99, a, c);
        const ResonanceFit fit = fit_resonance(trace, c);
        CHECK(fit.t_min == Approx(0.2330).epsilon(1e-3));
        CHECK(test::rel_err(fit.resonance.q_loaded, truth.q_loaded) < 1e-6);
        CHECK(fit.resonance.coupling_branch == CouplingBranch::UnderCoupled);
        CHECK(fit.self_coupling == Approx(0.99).epsilon(1e-6));
        CHECK(fit.round_trip_amplitude == Approx(a).epsilon(1e-6));
        CHECK(test::rel_err(fit.resonance.q_int, truth.q_int) < 1e-6);
        CHECK(test::rel_err(fit.resonance.q_ext, truth.q_ext) < 1e-6);
        CHECK(fit.fit.converged);
    }

    TEST_CASE("noisy trace recovers q_loaded within 1%")
    {
        DeviceConfig c;
        const double a = round_trip_amplitude(c);
        const Resonance truth = resonance_from_coupling(0.99, a, c);
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            TraceOptions opts;
            opts.noise = 0.005;
            opts.seed = seed;
            const ResonanceFit fit = fit_resonance(gen_resonance_trace(0.99, a, c, opts), c);
            CHECK(test::rel_err(fit.resonance.q_loaded, truth.q_loaded) < 0.01);
            CHECK(fit.t_min == Approx(0.2330).epsilon(0.01));
        }
    }

    TEST_CASE("over-coupled trace resolves to the over branch")
    {
        DeviceConfig c;
        const double a = round_trip_amplitude(c);
        const double t = 0.90;
        const ResonanceFit fit = fit_resonance(gen_resonance_trace(t, a, c), c);
        CHECK(fit.resonance.coupling_branch == CouplingBranch::OverCoupled);
        CHECK(fit.resonance.gamma_over_m() == Approx(resonance_from_coupling(t, a, c).gamma_over_m()).epsilon(1e-6));
    }

    TEST_CASE("critical trace caps extinction at the floor")
    {
        DeviceConfig c;
        const double a = round_trip_amplitude(c);
        const ResonanceFit fit = fit_resonance(gen_resonance_trace(a, a, c), c);
        CHECK(fit.resonance.extinction_db == Approx(40.0));
        CHECK(fit.resonance.coupling_branch == CouplingBranch::Critical);
        CHECK(fit.resonance.gamma_over_m() == Approx(1.0).epsilon(1e-3));
    }

    TEST_CASE("branch hints choose the root")
    {
        DeviceConfig c;
        const double a = round_trip_amplitude(c);
        const ResonanceTrace trace = gen_resonance_trace(0.99, a, c);
        ResonanceFitOptions under;
        under.hint = BranchHint::Under;
        ResonanceFitOptions over;
        over.hint = BranchHint::Over;
        const ResonanceFit fu = fit_resonance(trace, c, under);
        const ResonanceFit fo = fit_resonance(trace, c, over);
        CHECK(fu.resonance.gamma_over_m() < 1.0);
        CHECK(fo.resonance.gamma_over_m() > 1.0);
        CHECK(fu.resonance.q_loaded == Approx(fo.resonance.q_loaded));
        // Both roots explain the same dip: swapping t and a.
        CHECK(fu.self_coupling == Approx(fo.round_trip_amplitude));
    }

    TEST_CASE("Q-closure on fit outputs")
    {
        DeviceConfig c;
        const double a = round_trip_amplitude(c);
        for (double t : {0.999, 0.99, 0.95, 0.9, 0.8}) {
            const ResonanceFit fit = fit_resonance(gen_resonance_trace(t, a, c), c);
            const Resonance& r = fit.resonance;
            CHECK(std::abs(1.0 / r.q_loaded - 1.0 / r.q_int - 1.0 / r.q_ext) * r.q_loaded < 1e-9);
        }
    }

    TEST_CASE("fitting the baseline")
    {
        DeviceConfig c;
        ResonanceTrace trace = gen_resonance_trace(0.99, round_trip_amplitude(c), c);
        for (double& v : trace.transmission)
            v *= 0.93;
        ResonanceFitOptions opts;
        opts.fit_baseline = true;
        const ResonanceFit fit = fit_resonance(trace, c, opts);
        CHECK(fit.baseline == Approx(0.93).epsilon(1e-6));
        CHECK(fit.t_min == Approx(0.2330).epsilon(1e-3));
    }

    TEST_CASE("flat trace has no resonance")
    {
        ResonanceTrace flat;
        for (int k = 0; k < 100; ++k) {
            flat.wavelength_m.push_back(1550e-9 + k * 1e-12);
            flat.transmission.push_back(1.0);
        }
        CHECK_THROWS_AS(fit_resonance(flat, DeviceConfig{}), NoResonanceError);
    }

    TEST_CASE("two dips are ambiguous")
    {
        DeviceConfig c;
        ResonanceTrace one = gen_resonance_trace(0.95, round_trip_amplitude(c), c, {0.0, 0, 401, 6.0});
        ResonanceTrace two;
        const double span = one.wavelength_m.back() - one.wavelength_m.front();
        two = one;
        for (std::size_t k = 1; k < one.wavelength_m.size(); ++k) {
            two.wavelength_m.push_back(one.wavelength_m[k] + span);
            two.transmission.push_back(one.transmission[k]);
        }
        CHECK_THROWS_AS(fit_resonance(two, c), AmbiguousResonanceError);
    }

    TEST_CASE("broad dip with neighbouring orders at the window edges is a single resonance")
    {
        DeviceConfig c;
        const double a = round_trip_amplitude(c);
        const double t = self_coupling_for_ratio(50.0, c);
        TraceOptions opts;
        opts.noise = 0.005;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            opts.seed = seed;
            CHECK_NOTHROW(fit_resonance(gen_resonance_trace(t, a, c, opts), c));
        }
    }

    TEST_CASE("invalid traces")
    {
        ResonanceTrace short_trace;
        short_trace.wavelength_m = {1, 2, 3};
        short_trace.transmission = {1, 0.5, 1};
        CHECK_THROWS_AS(fit_resonance(short_trace, DeviceConfig{}), InputError);

        DeviceConfig c;
        ResonanceTrace unsorted = gen_resonance_trace(0.99, round_trip_amplitude(c), c, {0.0, 0, 101, 8.0});
        std::swap(unsorted.wavelength_m[3], unsorted.wavelength_m[4]);
        CHECK_THROWS_AS(fit_resonance(unsorted, c), InputError);
    }
}
