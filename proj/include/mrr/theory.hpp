#pragma once

#include "mrr/ring_model.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace mrr {

enum class BrightnessVariant
{
    PulsedOptimum4M, // Γ⁴/(Γ+M)⁵
    CwOptimum2M,     // Γ⁴/(Γ+M)⁶
};

std::string_view to_string(BrightnessVariant variant);

// Γ/(Γ+M): probability that a photon created in the cavity leaves through the bus.
double escape_efficiency(double gamma, double m);

// Detected-pair rate up to a constant prefactor. The pulsed form is the
// in-cavity generation factor Γ²/(Γ+M)³ times two escape factors.
double brightness_curve(double gamma, double m, BrightnessVariant variant);

// In-cavity pair generation factor Γ²/(Γ+M)³, normalized to 1 at its Γ = 2M peak.
double generation_factor_norm(double gamma_over_m);

// Location of the brightness maximum in units of M (4 or 2).
double optimal_gamma_over_m(BrightnessVariant variant);

// brightness_curve at Γ/M, divided by its analytic maximum.
double brightness_norm(double gamma_over_m, BrightnessVariant variant);

// Inverse of escape_efficiency: Γ/M = eta/(1-eta).
double gamma_ratio_from_heralding(double eta_escape);

enum class CouplingRegime
{
    UnderCoupled,
    Critical,
    ModeratelyOverCoupled,
    StronglyOverCoupled,
};

std::string_view to_string(CouplingRegime regime);

// Γ<M under, Γ=M critical, M≤Γ≤8M moderately over, Γ>8M strongly over.
CouplingRegime classify_regime(double gamma_over_m);

struct OperatingPoint
{
    double gamma_over_m = 0.0;
    double escape_eff = 0.0;
    double brightness_norm = 0.0;
    CouplingRegime regime = CouplingRegime::Critical;
};

OperatingPoint predict_operating_point(const Resonance& resonance, BrightnessVariant variant);

struct TheorySample
{
    double gamma_over_m = 0.0;
    double escape_eff = 0.0;
    double brightness_norm = 0.0; // max over the sampled grid is 1
};

struct TheoryCurve
{
    BrightnessVariant variant = BrightnessVariant::PulsedOptimum4M;
    double m_hz = 1.0;
    std::vector<TheorySample> samples;
};

// Samples Γ/M on a log-spaced grid [lo, hi] with n points.
TheoryCurve make_theory_curve(BrightnessVariant variant, double m_hz, double lo, double hi, std::size_t n);

struct MaximumResult
{
    double x = 0.0;
    double value = 0.0;
    bool at_boundary = false;
    int iterations = 0;
};

// Golden-section search for the maximum of a unimodal f on [lo, hi].
MaximumResult golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                                      double rel_tolerance = 1e-10);

} // namespace mrr
