#pragma once

#include "mrr/fit_engine.hpp"
#include "mrr/sfwm_model.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mrr {

enum class CountFitMode
{
    Full,
    LowPowerLinearized, // delta pinned to 0, rows above low_power_max_mw dropped
    SharedBeta,         // beta_s == beta_i
};

std::string_view to_string(CountFitMode mode);
// Accepts "full", "low-power", "shared-beta" (and underscore spellings).
CountFitMode parse_count_fit_mode(std::string_view text);

struct CountFitOptions
{
    double low_power_max_mw = 0.05;
    std::optional<AccidentalModel> accidentals; // default: pulsed at config.rep_rate_hz
    double loss_budget_rel_sigma = 0.0;         // relative 1σ of the loss budget
    FitSettings settings;
};

struct IntrinsicEstimate
{
    double value = 0.0;
    double sigma_fit = 0.0;
    double sigma_loss = 0.0;
    double sigma_total = 0.0; // quadrature sum
    bool exceeds_unity = false;
};

struct SfwmFit
{
    CountFitMode mode = CountFitMode::Full;
    SfwmParams params;
    SfwmParams sigmas;
    IntrinsicEstimate intrinsic_s;
    IntrinsicEstimate intrinsic_i;
    FitResult fit;
    std::size_t rows_used = 0;
    std::vector<std::string> warnings;
};

// Physical parameter order used by the count problems.
inline constexpr std::size_t kCountParamCount = 8;
std::vector<std::string> count_parameter_names();

// Joint problem over {C_s, C_i, CC} in count space with Poisson weights
// 1/max(N, 1). rows must be sorted by power. Parameters follow
// count_parameter_names(), with beta_i dropped in SharedBeta mode.
FitProblem build_count_problem(const std::vector<CountRow>& rows, const DeviceConfig& config, CountFitMode mode,
                               const CountFitOptions& options = {});

// Parameters vector of a count problem back to SfwmParams.
SfwmParams unpack_count_params(const Eigen::VectorXd& values, CountFitMode mode);

SfwmFit fit_counts(const CountSweep& sweep, const DeviceConfig& config, CountFitMode mode,
                   const CountFitOptions& options = {});

} // namespace mrr
