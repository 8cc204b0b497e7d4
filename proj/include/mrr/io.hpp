#pragma once

#include "mrr/count_fit.hpp"
#include "mrr/resonance_fit.hpp"
#include "mrr/ring_model.hpp"
#include "mrr/sfwm_model.hpp"
#include "mrr/synth.hpp"
#include "mrr/theory.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mrr {

inline constexpr std::string_view kToolName = "mrrtool";
inline constexpr std::string_view kToolVersion = "0.1.0";

// Shortest decimal string that round-trips to the same double.
std::string format_number(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string sha256_hex(std::string_view bytes);

// ---- device config -------------------------------------------------------

// key = value lines, '#' comments, keys are the DeviceConfig field names.
// When neither phase key is given the MZI phase is recalibrated for the
// effective losses.
struct ConfigLoad
{
    DeviceConfig config;
    bool phase_from_file = false;
    std::map<std::string, std::size_t> key_lines;
};

ConfigLoad parse_config(std::string_view text, std::string_view source);
// "key=value" overrides applied after the file (CLI flags win).
DeviceConfig resolve_config(const std::optional<std::filesystem::path>& path,
                            const std::vector<std::string>& overrides);
std::vector<std::string> config_keys();
nlohmann::json to_json(const DeviceConfig& config);

// ---- CSV -----------------------------------------------------------------

// Columns wavelength_nm,transmission. Errors name file, line and field.
ResonanceTrace parse_trace_csv(std::string_view text, std::string_view source);
ResonanceTrace read_trace_csv(const std::filesystem::path& path);
std::string format_trace_csv(const ResonanceTrace& trace);

// Columns power_mw,integration_s,c_s,c_i,cc; power strictly increasing.
CountSweep parse_count_csv(std::string_view text, std::string_view source);
CountSweep read_count_csv(const std::filesystem::path& path);
std::string format_count_csv(const CountSweep& sweep);

std::string format_theory_csv(const TheoryCurve& curve);

// ---- synthetic dataset spec ----------------------------------------------

// key = value lines. Required: seed. Lists are comma separated.
// voltages = default selects the standard grid.
struct SimulationSpec
{
    SynthSpec synth;
    bool has_seed = false;
    std::optional<double> trace_gamma_over_m; // also emit a single trace
};

SimulationSpec parse_simulation_spec(std::string_view text, std::string_view source);

// ---- reports -------------------------------------------------------------

struct InputDigest
{
    std::string name;
    std::string sha256;
};

struct RunManifest
{
    std::string subcommand;
    DeviceConfig config;
    std::vector<InputDigest> inputs;
    std::vector<std::string> outputs;
    std::optional<std::uint64_t> seed;
    nlohmann::json options = nlohmann::json::object();
};

// SOURCE_DATE_EPOCH when set, otherwise the wall clock, as ISO 8601 UTC.
std::string run_timestamp();
InputDigest digest_file(const std::filesystem::path& path);
nlohmann::json to_json(const RunManifest& manifest);

nlohmann::json to_json(const Resonance& resonance);
nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const SfwmParams& params);
nlohmann::json to_json(const IntrinsicEstimate& estimate);
nlohmann::json to_json(const ResonanceFit& fit);
nlohmann::json to_json(const SfwmFit& fit);

std::string dump_json(const nlohmann::json& value);

} // namespace mrr
