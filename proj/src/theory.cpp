#include "mrr/theory.hpp"

#include "mrr/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace mrr {

namespace {

void require_rates(double gamma, double m)
{
    if (!(m > 0.0))
        throw InputError(fmt::format("intrinsic loss rate M = {} must be > 0", m));
    if (!(gamma >= 0.0))
        throw InputError(fmt::format("coupling rate Γ = {} must be >= 0", gamma));
}

} // namespace

std::string_view to_string(BrightnessVariant variant)
{
    return variant == BrightnessVariant::PulsedOptimum4M ? "pulsed" : "cw";
}

double escape_efficiency(double gamma, double m)
{
    require_rates(gamma, m);
    if (std::isinf(gamma))
        return 1.0;
    return gamma / (gamma + m);
}

double brightness_curve(double gamma, double m, BrightnessVariant variant)
{
    require_rates(gamma, m);
    if (std::isinf(gamma))
        return 0.0;
    const double total = gamma + m;
    const double g2 = gamma * gamma;
    const double b = g2 * g2 / std::pow(total, 5);
    return variant == BrightnessVariant::PulsedOptimum4M ? b : b / total;
}

double generation_factor_norm(double gamma_over_m)
{
    if (!(gamma_over_m >= 0.0))
        throw InputError("Γ/M must be >= 0");
    const double x = gamma_over_m;
    return x * x / std::pow(1.0 + x, 3) / (4.0 / 27.0);
}

double optimal_gamma_over_m(BrightnessVariant variant)
{
    return variant == BrightnessVariant::PulsedOptimum4M ? 4.0 : 2.0;
}

double brightness_norm(double gamma_over_m, BrightnessVariant variant)
{
    return brightness_curve(gamma_over_m, 1.0, variant) / brightness_curve(optimal_gamma_over_m(variant), 1.0, variant);
}

double gamma_ratio_from_heralding(double eta_escape)
{
    if (!(eta_escape >= 0.0))
        throw InputError(fmt::format("escape efficiency {} must be >= 0", eta_escape));
    if (eta_escape >= 1.0)
        throw InputError(fmt::format("escape efficiency {} >= 1 is unreachable with a lossy ring", eta_escape));
    return eta_escape / (1.0 - eta_escape);
}

std::string_view to_string(CouplingRegime regime)
{
    switch (regime) {
    case CouplingRegime::UnderCoupled:
        return "under-coupled";
    case CouplingRegime::Critical:
        return "critical";
    case CouplingRegime::ModeratelyOverCoupled:
        return "moderately over-coupled";
    case CouplingRegime::StronglyOverCoupled:
        return "strongly over-coupled";
    }
    return "unknown";
}

CouplingRegime classify_regime(double gamma_over_m)
{
    if (std::abs(gamma_over_m - 1.0) <= 1e-6)
        return CouplingRegime::Critical;
    if (gamma_over_m < 1.0)
        return CouplingRegime::UnderCoupled;
    if (gamma_over_m <= 8.0)
        return CouplingRegime::ModeratelyOverCoupled;
    return CouplingRegime::StronglyOverCoupled;
}

OperatingPoint predict_operating_point(const Resonance& resonance, BrightnessVariant variant)
{
    OperatingPoint op;
    op.gamma_over_m = resonance.gamma_hz / resonance.m_hz;
    op.escape_eff = escape_efficiency(resonance.gamma_hz, resonance.m_hz);
    op.brightness_norm = brightness_norm(op.gamma_over_m, variant);
    op.regime = classify_regime(op.gamma_over_m);
    return op;
}

TheoryCurve make_theory_curve(BrightnessVariant variant, double m_hz, double lo, double hi, std::size_t n)
{
    if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi))
        throw InputError(fmt::format("Γ/M range [{}, {}] must satisfy 0 < lo < hi", lo, hi));
    if (n < 2)
        throw InputError("theory curve needs at least two samples");
    if (!(m_hz > 0.0))
        throw InputError("M must be > 0");

    TheoryCurve curve;
    curve.variant = variant;
    curve.m_hz = m_hz;
    curve.samples.reserve(n);
    const double log_lo = std::log(lo);
    const double step = (std::log(hi) - log_lo) / static_cast<double>(n - 1);
    double peak = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double x = k + 1 == n ? hi : std::exp(log_lo + step * static_cast<double>(k));
        TheorySample s;
        s.gamma_over_m = x;
        s.escape_eff = escape_efficiency(x * m_hz, m_hz);
        s.brightness_norm = brightness_curve(x * m_hz, m_hz, variant);
        peak = std::max(peak, s.brightness_norm);
        curve.samples.push_back(s);
    }
    for (TheorySample& s : curve.samples)
        s.brightness_norm /= peak;
    return curve;
}

MaximumResult golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                                      double rel_tolerance)
{
    if (!(hi > lo))
        throw InputError("golden-section search needs hi > lo");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    int iterations = 0;
    while (b - a > rel_tolerance * (std::abs(a) + std::abs(b)) && iterations < 500) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        ++iterations;
    }

    MaximumResult result;
    result.x = 0.5 * (a + b);
    result.value = f(result.x);
    result.iterations = iterations;
    // A bracket that collapsed onto an end point means the maximum is not interior.
    const double edge = 1e-6 * (std::abs(hi - lo));
    if (result.x - lo <= edge && f(lo) >= result.value) {
        result.x = lo;
        result.value = f(lo);
        result.at_boundary = true;
    } else if (hi - result.x <= edge && f(hi) >= result.value) {
        result.x = hi;
        result.value = f(hi);
        result.at_boundary = true;
    }
    return result;
}

} // namespace mrr
