#include "mrr/resonance_fit.hpp"

#include "mrr/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <memory>

namespace mrr {

namespace {

constexpr double kGHz = 1e9;

struct PreparedTrace
{
    std::vector<double> x_ghz; // frequency relative to nu_ref, GHz
    std::vector<double> y;
    double nu_ref = 0.0;       // Hz
    double x_min = 0.0;
    double x_max = 0.0;
    double fwhm_guess_ghz = 0.0;
    double t_min_guess = 0.5;
    double baseline_guess = 1.0;
};

std::vector<double> moving_average(const std::vector<double>& y, std::size_t half_width)
{
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t lo = i >= half_width ? i - half_width : 0;
        const std::size_t hi = std::min(y.size() - 1, i + half_width);
        double sum = 0.0;
        for (std::size_t k = lo; k <= hi; ++k)
            sum += y[k];
        out[i] = sum / static_cast<double>(hi - lo + 1);
    }
    return out;
}

PreparedTrace prepare(const ResonanceTrace& trace, const ResonanceFitOptions& options)
{
    const std::size_t n = trace.wavelength_m.size();
    if (n != trace.transmission.size())
        throw InputError("trace wavelength and transmission columns differ in length");
    if (n < 8)
        throw InputError(fmt::format("trace has {} points; at least 8 are needed", n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(trace.wavelength_m[i] > 0.0) || !std::isfinite(trace.transmission[i]))
            throw InputError(fmt::format("trace point {} is not a finite positive-wavelength sample", i + 1));
        if (i > 0 && !(trace.wavelength_m[i] > trace.wavelength_m[i - 1]))
            throw InputError(fmt::format("trace point {}: wavelengths must be strictly increasing", i + 1));
    }

    const std::vector<double> smooth = moving_average(trace.transmission, 2);
    const auto min_it = std::min_element(smooth.begin(), smooth.end());
    const auto i_min = static_cast<std::size_t>(min_it - smooth.begin());

    PreparedTrace prep;
    if (options.fit_baseline) {
        std::vector<double> sorted = smooth;
        std::sort(sorted.begin(), sorted.end());
        prep.baseline_guess = std::clamp(sorted[sorted.size() * 95 / 100], 0.5, 1.5);
    }
    const double floor_t = *min_it;
    if (floor_t > 0.99 * prep.baseline_guess)
        throw NoResonanceError(fmt::format("no resonance dip: minimum transmission {:.4f} exceeds 0.99", floor_t));

    prep.nu_ref = kSpeedOfLight / trace.wavelength_m[i_min];
    prep.x_ghz.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        prep.x_ghz[i] = (kSpeedOfLight / trace.wavelength_m[i] - prep.nu_ref) / kGHz;
    prep.y = trace.transmission;
    prep.x_min = *std::min_element(prep.x_ghz.begin(), prep.x_ghz.end());
    prep.x_max = *std::max_element(prep.x_ghz.begin(), prep.x_ghz.end());

    // Half-depth segmentation.
    const double depth = prep.baseline_guess - floor_t;
    const double threshold = prep.baseline_guess - 0.5 * depth;
    struct Segment
    {
        std::size_t begin, end; // inclusive
    };
    // Two runs below half depth are one dip unless the signal climbs back
    // above three quarters of the way to the baseline between them.
    const double recovered = prep.baseline_guess - 0.25 * depth;
    std::vector<Segment> segments;
    for (std::size_t i = 0; i < n; ++i) {
        if (smooth[i] >= threshold)
            continue;
        bool merge = false;
        if (!segments.empty()) {
            const auto gap_begin = smooth.begin() + static_cast<std::ptrdiff_t>(segments.back().end);
            merge = *std::max_element(gap_begin, smooth.begin() + static_cast<std::ptrdiff_t>(i)) < recovered;
        }
        if (merge)
            segments.back().end = i;
        else
            segments.push_back({i, i});
    }
    // Segments cut by the window edge are tails of neighbouring orders, which
    // the FSR-periodic line shape already models.
    if (segments.size() > 1)
        std::erase_if(segments, [&](const Segment& s) {
            const bool at_edge = s.begin == 0 || s.end == n - 1;
            return at_edge && !(s.begin <= i_min && i_min <= s.end);
        });
    if (segments.size() > 1)
        throw AmbiguousResonanceError(
            fmt::format("trace contains {} separate dips; window the trace around a single resonance", segments.size()));

    const Segment seg = segments.front();
    const double width = std::abs(prep.x_ghz[seg.end] - prep.x_ghz[seg.begin]);
    const double spacing = std::abs(prep.x_max - prep.x_min) / static_cast<double>(n - 1);
    prep.fwhm_guess_ghz = std::max(width, 2.0 * spacing);
    prep.t_min_guess = std::clamp(floor_t / prep.baseline_guess, 2.0 * options.transmission_floor, 0.999);
    return prep;
}

struct LineShape
{
    double t_rt; // s

    // Returns model values and, when jac != nullptr, the Jacobian columns
    // (offset, fwhm, t_min, baseline).
    Eigen::VectorXd evaluate(const std::vector<double>& x_ghz, const Eigen::VectorXd& p, Eigen::MatrixXd* jac) const
    {
        const double offset = p[0];
        const double fwhm = p[1];
        const double t_min = p[2];
        const double base = p[3];
        const double d = 1.0 - t_min;
        const double kappa = 2.0 * kPi * fwhm * kGHz;
        const double r = std::exp(-0.5 * kappa * t_rt);
        const double u = (1.0 - r) * (1.0 - r);
        const double dr_dfwhm = -0.5 * t_rt * r * 2.0 * kPi * kGHz;

        const auto n = static_cast<Eigen::Index>(x_ghz.size());
        Eigen::VectorXd out(n);
        if (jac)
            jac->resize(n, 4);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double theta = kPi * (x_ghz[static_cast<std::size_t>(i)] - offset) * kGHz * t_rt;
            const double sn = std::sin(theta);
            const double s = sn * sn;
            const double den = u + 4.0 * r * s;
            const double l = u / den;
            out[i] = base * (1.0 - d * l);
            if (jac) {
                const double dl_ds = -4.0 * r * u / (den * den);
                const double ds_doffset = std::sin(2.0 * theta) * (-kPi * kGHz * t_rt);
                const double dl_dr = -4.0 * s * (1.0 - r) * (1.0 + r) / (den * den);
                (*jac)(i, 0) = -base * d * dl_ds * ds_doffset;
                (*jac)(i, 1) = -base * d * dl_dr * dr_dfwhm;
                (*jac)(i, 2) = base * l;
                (*jac)(i, 3) = 1.0 - d * l;
            }
        }
        return out;
    }
};

FitProblem make_problem(const PreparedTrace& prep, const DeviceConfig& config, const ResonanceFitOptions& options)
{
    auto shared = std::make_shared<PreparedTrace>(prep);
    const LineShape shape{round_trip_time(config)};

    FitProblem problem;
    problem.residuals = [shared, shape](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        Eigen::VectorXd model = shape.evaluate(shared->x_ghz, p, nullptr);
        for (Eigen::Index i = 0; i < model.size(); ++i)
            model[i] -= shared->y[static_cast<std::size_t>(i)];
        return model;
    };
    problem.jacobian = [shared, shape](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
        Eigen::MatrixXd jac;
        shape.evaluate(shared->x_ghz, p, &jac);
        return jac;
    };
    const double inf = std::numeric_limits<double>::infinity();
    problem.parameters = {
        {"center_offset_ghz", 0.0, prep.x_min, prep.x_max, false},
        {"fwhm_ghz", prep.fwhm_guess_ghz, 0.0, inf, false},
        {"t_min", prep.t_min_guess, options.transmission_floor, 1.0, false},
        {"baseline", prep.baseline_guess, 0.5, 1.5, !options.fit_baseline},
    };
    problem.settings = options.settings;
    return problem;
}

} // namespace

std::string_view to_string(BranchHint hint)
{
    switch (hint) {
    case BranchHint::Auto:
        return "auto";
    case BranchHint::Under:
        return "under";
    case BranchHint::Over:
        return "over";
    }
    return "auto";
}

FitProblem build_resonance_problem(const ResonanceTrace& trace, const DeviceConfig& config,
                                   const ResonanceFitOptions& options)
{
    return make_problem(prepare(trace, options), config, options);
}

QualitySplit split_quality(double center_wavelength_m, double q_loaded, double t_min, const DeviceConfig& config,
                           BranchHint hint, const ResonanceFitOptions& options)
{
    const double omega_t_rt = angular_frequency(center_wavelength_m) * round_trip_time(config);
    // Round-trip product r = t a from the loaded decay, |t - a| from the extinction.
    const double r = std::exp(-0.5 * omega_t_rt / q_loaded);
    const double d = std::sqrt(std::max(t_min, 0.0)) * (1.0 - r);
    const double s = std::sqrt(d * d + 4.0 * r);
    const double hi = std::min((s + d) / 2.0, 1.0);
    const double lo = (s - d) / 2.0;

    bool under = true;
    switch (hint) {
    case BranchHint::Under:
        under = true;
        break;
    case BranchHint::Over:
        under = false;
        break;
    case BranchHint::Auto: {
        const double a_cfg = round_trip_amplitude(config);
        under = std::abs(lo - a_cfg) <= std::abs(hi - a_cfg);
        break;
    }
    }
    QualitySplit split;
    split.t = under ? hi : lo;
    split.a = under ? lo : hi;
    if (!(split.a < 1.0))
        throw ModelError("fitted resonance implies a lossless ring on the requested coupling branch");

    double q_int = omega_t_rt / -std::log(split.a * split.a);
    const double inv_ext = 1.0 / q_loaded - 1.0 / q_int;
    double q_ext = inv_ext > 0.0 ? 1.0 / inv_ext : std::numeric_limits<double>::infinity();
    const double ext = extinction_db(t_min, options.transmission_floor);
    CouplingBranch branch = under ? CouplingBranch::UnderCoupled : CouplingBranch::OverCoupled;
    if (ext >= options.critical_extinction_db) {
        branch = CouplingBranch::Critical;
        split.t = split.a = std::sqrt(lo * hi);
        q_int = q_ext = 2.0 * q_loaded;
    }
    split.resonance = make_resonance(center_wavelength_m, q_int, q_ext, ext, branch);
    // Keep the measured loaded Q exactly; make_resonance recomputes it from the harmonic sum.
    split.resonance.q_loaded = q_loaded;
    split.resonance.fwhm_hz = kSpeedOfLight / center_wavelength_m / q_loaded;
    return split;
}

ResonanceFit fit_resonance(const ResonanceTrace& trace, const DeviceConfig& config, const ResonanceFitOptions& options)
{
    const PreparedTrace prep = prepare(trace, options);
    const FitProblem problem = make_problem(prep, config, options);

    ResonanceFit out;
    out.fit = least_squares(problem);
    const Eigen::VectorXd& p = out.fit.estimates;
    const double nu0 = prep.nu_ref + p[0] * kGHz;
    const double fwhm_hz = p[1] * kGHz;
    if (!(fwhm_hz > 0.0))
        throw ModelError("resonance fit collapsed to zero linewidth");
    const double q_loaded = nu0 / fwhm_hz;

    out.t_min = p[2];
    out.baseline = p[3];
    out.q_loaded_sigma = q_loaded * out.fit.sigmas[1] / p[1];
    out.extinction_db_sigma = 10.0 / std::log(10.0) * out.fit.sigmas[2] / p[2];

    const QualitySplit split = split_quality(kSpeedOfLight / nu0, q_loaded, out.t_min, config, options.hint, options);
    out.resonance = split.resonance;
    out.self_coupling = split.t;
    out.round_trip_amplitude = split.a;

    const Eigen::VectorXd residual = problem.residuals(p);
    out.residuals.assign(residual.data(), residual.data() + residual.size());
    out.model.resize(out.residuals.size());
    for (std::size_t i = 0; i < out.model.size(); ++i)
        out.model[i] = prep.y[i] + out.residuals[i];
    return out;
}

} // namespace mrr
