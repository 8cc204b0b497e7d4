#include "mrr/io.hpp"

#include "mrr/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <sstream>

namespace mrr {

namespace fs = std::filesystem;

std::string format_number(double value)
{
    return fmt::format("{}", value);
}

std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError(fmt::format("{}: cannot open file", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const fs::path& path, std::string_view text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw InputError(fmt::format("{}: cannot write file", path.string()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out)
        throw InputError(fmt::format("{}: write failed", path.string()));
}

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    std::string hex;
    hex.reserve(2 * length);
    for (unsigned int k = 0; k < length; ++k)
        hex += fmt::format("{:02x}", digest[k]);
    return hex;
}

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return parts;
}

std::vector<std::string_view> lines_of(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            if (start < text.size())
                lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return lines;
}

std::optional<double> to_double(std::string_view s)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value))
        return std::nullopt;
    return value;
}

[[noreturn]] void field_error(std::string_view source, std::size_t line, std::string_view field, std::string_view what)
{
    throw InputError(fmt::format("{}:{}: field '{}': {}", source, line, field, what));
}

double parse_field(std::string_view cell, std::string_view source, std::size_t line, std::string_view field)
{
    const auto value = to_double(cell);
    if (!value)
        field_error(source, line, field, fmt::format("'{}' is not a finite number", cell));
    return *value;
}

struct ConfigKey
{
    std::string_view name;
    double DeviceConfig::*member;
};

constexpr ConfigKey kConfigKeys[] = {
    {"ring_circumference_m", &DeviceConfig::ring_circumference_m},
    {"group_index", &DeviceConfig::group_index},
    {"round_trip_transmission", &DeviceConfig::round_trip_transmission},
    {"pump_wavelength_m", &DeviceConfig::pump_wavelength_m},
    {"fsr_hz", &DeviceConfig::fsr_hz},
    {"rep_rate_hz", &DeviceConfig::rep_rate_hz},
    {"pump_spectral_width_m", &DeviceConfig::pump_spectral_width_m},
    {"eta_gc", &DeviceConfig::eta_gc},
    {"eta_det", &DeviceConfig::eta_det},
    {"eta_channel_s", &DeviceConfig::eta_channel_s},
    {"eta_channel_i", &DeviceConfig::eta_channel_i},
    {"coupler_excess_loss_db", &DeviceConfig::coupler_excess_loss_db},
    {"phase_offset_rad", &DeviceConfig::phase_offset_rad},
    {"phase_per_volt_sq", &DeviceConfig::phase_per_volt_sq},
    {"resonance_detuning_m", &DeviceConfig::resonance_detuning_m},
};

bool is_phase_key(std::string_view key)
{
    return key == "phase_offset_rad" || key == "phase_per_volt_sq";
}

// Returns true when the key was a phase key.
bool assign_config(DeviceConfig& config, std::string_view key, std::string_view value, std::string_view source,
                   std::size_t line)
{
    const auto it = std::find_if(std::begin(kConfigKeys), std::end(kConfigKeys),
                                 [&](const ConfigKey& k) { return k.name == key; });
    if (it == std::end(kConfigKeys))
        field_error(source, line, key, "unknown key");
    config.*(it->member) = parse_field(value, source, line, key);
    return is_phase_key(key);
}

struct KeyValue
{
    std::string_view key;
    std::string_view value;
    std::size_t line;
};

std::vector<KeyValue> parse_key_values(std::string_view text, std::string_view source)
{
    std::vector<KeyValue> entries;
    std::map<std::string_view, std::size_t> seen;
    const auto lines = lines_of(text);
    for (std::size_t k = 0; k < lines.size(); ++k) {
        std::string_view line = lines[k];
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw InputError(fmt::format("{}:{}: expected 'key = value'", source, k + 1));
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty())
            throw InputError(fmt::format("{}:{}: missing key", source, k + 1));
        if (const auto prev = seen.find(key); prev != seen.end())
            field_error(source, k + 1, key, fmt::format("duplicate key (first on line {})", prev->second));
        seen.emplace(key, k + 1);
        entries.push_back({key, value, k + 1});
    }
    return entries;
}

} // namespace

// ---- config --------------------------------------------------------------

ConfigLoad parse_config(std::string_view text, std::string_view source)
{
    ConfigLoad load;
    for (const auto& entry : parse_key_values(text, source)) {
        load.phase_from_file |= assign_config(load.config, entry.key, entry.value, source, entry.line);
        load.key_lines.emplace(std::string(entry.key), entry.line);
    }
    return load;
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    for (const auto& k : kConfigKeys)
        keys.emplace_back(k.name);
    return keys;
}

DeviceConfig resolve_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides)
{
    ConfigLoad load;
    if (path) {
        const std::string text = read_text_file(*path);
        load = parse_config(text, path->string());
    }
    bool phase_given = load.phase_from_file;
    std::map<std::string, std::size_t> override_index;
    for (std::size_t k = 0; k < overrides.size(); ++k) {
        const std::string& item = overrides[k];
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw InputError(fmt::format("--set {}: expected key=value", item));
        const std::string_view view(item);
        const std::string key(trim(view.substr(0, eq)));
        phase_given |= assign_config(load.config, key, trim(view.substr(eq + 1)), "--set", k + 1);
        override_index[key] = k + 1;
    }
    try {
        validate(load.config);
    } catch (const InputError& e) {
        const std::string what = e.what();
        for (const auto& [key, index] : override_index)
            if (what.find(fmt::format("'{}'", key)) != std::string::npos)
                throw InputError(fmt::format("--set #{}: {}", index, what));
        const std::string source = path ? path->string() : std::string("config");
        for (const auto& [key, line] : load.key_lines)
            if (what.find(fmt::format("'{}'", key)) != std::string::npos)
                throw InputError(fmt::format("{}:{}: {}", source, line, what));
        throw InputError(fmt::format("{}: {}", source, what));
    }
    if (!phase_given && (path || !overrides.empty()))
        load.config = calibrate_phase(load.config);
    return load.config;
}

nlohmann::json to_json(const DeviceConfig& config)
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& k : kConfigKeys)
        j[std::string(k.name)] = config.*(k.member);
    return j;
}

// ---- CSV -----------------------------------------------------------------

namespace {

struct CsvTable
{
    std::vector<std::size_t> column_index; // position of each requested column
    std::vector<std::pair<std::size_t, std::vector<double>>> rows; // (line, values in requested order)
};

CsvTable parse_csv(std::string_view text, std::string_view source, const std::vector<std::string_view>& columns)
{
    const auto lines = lines_of(text);
    std::size_t header_line = 0;
    while (header_line < lines.size() &&
           (trim(lines[header_line]).empty() || trim(lines[header_line]).front() == '#'))
        ++header_line;
    if (header_line == lines.size())
        throw InputError(fmt::format("{}:1: empty file, expected header '{}'", source, fmt::join(columns, ",")));

    const auto header = split(lines[header_line], ',');
    CsvTable table;
    for (const auto column : columns) {
        const auto it = std::find(header.begin(), header.end(), column);
        if (it == header.end())
            field_error(source, header_line + 1, column, "missing column");
        table.column_index.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    for (std::size_t k = header_line + 1; k < lines.size(); ++k) {
        const auto line = trim(lines[k]);
        if (line.empty() || line.front() == '#')
            continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size())
            throw InputError(fmt::format("{}:{}: expected {} cells, found {}", source, k + 1, header.size(),
                                         cells.size()));
        std::vector<double> values;
        for (std::size_t c = 0; c < columns.size(); ++c)
            values.push_back(parse_field(cells[table.column_index[c]], source, k + 1, columns[c]));
        table.rows.emplace_back(k + 1, std::move(values));
    }
    if (table.rows.empty())
        throw InputError(fmt::format("{}:{}: no data rows", source, header_line + 1));
    return table;
}

} // namespace

ResonanceTrace parse_trace_csv(std::string_view text, std::string_view source)
{
    const auto table = parse_csv(text, source, {"wavelength_nm", "transmission"});
    ResonanceTrace trace;
    double previous = -1.0;
    for (const auto& [line, v] : table.rows) {
        if (!(v[0] > 0.0))
            field_error(source, line, "wavelength_nm", "must be > 0");
        if (v[0] <= previous)
            field_error(source, line, "wavelength_nm", "not strictly increasing");
        if (v[1] < 0.0)
            field_error(source, line, "transmission", "must be >= 0");
        previous = v[0];
        trace.wavelength_m.push_back(v[0] * 1e-9);
        trace.transmission.push_back(v[1]);
    }
    return trace;
}

ResonanceTrace read_trace_csv(const fs::path& path)
{
    return parse_trace_csv(read_text_file(path), path.string());
}

std::string format_trace_csv(const ResonanceTrace& trace)
{
    std::string out = "wavelength_nm,transmission\n";
    for (std::size_t k = 0; k < trace.wavelength_m.size(); ++k)
        out += fmt::format("{},{}\n", trace.wavelength_m[k] * 1e9, trace.transmission[k]);
    return out;
}

CountSweep parse_count_csv(std::string_view text, std::string_view source)
{
    static const std::vector<std::string_view> columns = {"power_mw", "integration_s", "c_s", "c_i", "cc"};
    const auto table = parse_csv(text, source, columns);
    CountSweep sweep;
    double previous = -1.0;
    for (const auto& [line, v] : table.rows) {
        if (v[0] < 0.0)
            field_error(source, line, "power_mw", "must be >= 0");
        if (v[0] <= previous)
            field_error(source, line, "power_mw", "not strictly increasing");
        if (!(v[1] > 0.0))
            field_error(source, line, "integration_s", "must be > 0");
        for (std::size_t c = 2; c < 5; ++c)
            if (v[c] < 0.0)
                field_error(source, line, columns[c], "must be >= 0");
        if (v[4] > std::min(v[2], v[3]))
            field_error(source, line, "cc", "exceeds min(c_s, c_i)");
        previous = v[0];
        sweep.rows.push_back({v[0], v[1], v[2], v[3], v[4]});
    }
    return sweep;
}

CountSweep read_count_csv(const fs::path& path)
{
    return parse_count_csv(read_text_file(path), path.string());
}

std::string format_count_csv(const CountSweep& sweep)
{
    std::string out = "power_mw,integration_s,c_s,c_i,cc\n";
    for (const auto& r : sweep.rows)
        out += fmt::format("{},{},{},{},{}\n", r.power_mw, r.integration_s, r.c_s, r.c_i, r.cc);
    return out;
}

std::string format_theory_csv(const TheoryCurve& curve)
{
    std::string out = "gamma_over_m,escape_eff,brightness_norm\n";
    for (const auto& s : curve.samples)
        out += fmt::format("{},{},{}\n", s.gamma_over_m, s.escape_eff, s.brightness_norm);
    return out;
}

// ---- simulation spec -----------------------------------------------------

SimulationSpec parse_simulation_spec(std::string_view text, std::string_view source)
{
    SimulationSpec spec;
    std::size_t powers_line = 0;
    spec.synth = default_fig2_spec(0);
    spec.synth.voltages.clear();
    spec.synth.truth.eta_s = 0.18;
    spec.synth.truth.eta_i = 0.19;

    std::map<std::string_view, double SfwmParams::*> truth_keys = {
        {"eta_s", &SfwmParams::eta_s},   {"eta_i", &SfwmParams::eta_i},   {"gamma_eff", &SfwmParams::gamma_eff},
        {"beta_s", &SfwmParams::beta_s}, {"beta_i", &SfwmParams::beta_i}, {"delta", &SfwmParams::delta},
        {"dc_s", &SfwmParams::dc_s},     {"dc_i", &SfwmParams::dc_i},
    };

    auto parse_list = [&](const KeyValue& kv) {
        std::vector<double> values;
        for (const auto cell : split(kv.value, ','))
            values.push_back(parse_field(cell, source, kv.line, kv.key));
        return values;
    };

    for (const auto& kv : parse_key_values(text, source)) {
        if (const auto it = truth_keys.find(kv.key); it != truth_keys.end()) {
            spec.synth.truth.*(it->second) = parse_field(kv.value, source, kv.line, kv.key);
        } else if (kv.key == "seed") {
            std::uint64_t seed = 0;
            const auto [ptr, ec] = std::from_chars(kv.value.data(), kv.value.data() + kv.value.size(), seed);
            if (ec != std::errc() || ptr != kv.value.data() + kv.value.size())
                field_error(source, kv.line, kv.key, fmt::format("'{}' is not an unsigned 64-bit integer", kv.value));
            spec.synth.rng_seed = seed;
            spec.has_seed = true;
        } else if (kv.key == "powers_mw") {
            spec.synth.powers_mw = parse_list(kv);
            powers_line = kv.line;
        } else if (kv.key == "voltages") {
            spec.synth.voltages = kv.value == "default" ? default_voltage_grid() : parse_list(kv);
        } else if (kv.key == "integration_s") {
            spec.synth.integration_s = parse_field(kv.value, source, kv.line, kv.key);
        } else if (kv.key == "trace_noise") {
            spec.synth.trace_noise = parse_field(kv.value, source, kv.line, kv.key);
        } else if (kv.key == "trace_points") {
            const double n = parse_field(kv.value, source, kv.line, kv.key);
            if (n < 8 || n != std::floor(n))
                field_error(source, kv.line, kv.key, "must be an integer >= 8");
            spec.synth.trace_points = static_cast<std::size_t>(n);
        } else if (kv.key == "trace_span_linewidths") {
            spec.synth.trace_span_linewidths = parse_field(kv.value, source, kv.line, kv.key);
        } else if (kv.key == "trace_gamma_over_m") {
            spec.trace_gamma_over_m = parse_field(kv.value, source, kv.line, kv.key);
        } else if (kv.key == "noiseless") {
            if (kv.value != "true" && kv.value != "false")
                field_error(source, kv.line, kv.key, "expected true or false");
            spec.synth.noiseless = kv.value == "true";
        } else {
            field_error(source, kv.line, kv.key, "unknown key");
        }
    }
    if (spec.synth.powers_mw.empty())
        throw InputError(fmt::format("{}: powers_mw must not be empty", source));
    if (!std::is_sorted(spec.synth.powers_mw.begin(), spec.synth.powers_mw.end()) ||
        std::adjacent_find(spec.synth.powers_mw.begin(), spec.synth.powers_mw.end()) != spec.synth.powers_mw.end())
        field_error(source, powers_line, "powers_mw", "not strictly increasing");
    if (!(spec.synth.integration_s > 0.0))
        throw InputError(fmt::format("{}: field 'integration_s': must be > 0", source));
    if (spec.synth.trace_noise < 0.0)
        throw InputError(fmt::format("{}: field 'trace_noise': must be >= 0", source));
    if (spec.trace_gamma_over_m && !(*spec.trace_gamma_over_m > 0.0))
        throw InputError(fmt::format("{}: field 'trace_gamma_over_m': must be > 0", source));
    return spec;
}

// ---- reports -------------------------------------------------------------

std::string run_timestamp()
{
    std::time_t seconds = 0;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
        long long value = 0;
        const std::string_view s(epoch);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw InputError(fmt::format("SOURCE_DATE_EPOCH '{}' is not an integer", s));
        seconds = static_cast<std::time_t>(value);
    } else {
        seconds = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm utc{};
    gmtime_r(&seconds, &utc);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buffer;
}

InputDigest digest_file(const fs::path& path)
{
    return {path.filename().string(), sha256_hex(read_text_file(path))};
}

nlohmann::json to_json(const RunManifest& manifest)
{
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& d : manifest.inputs)
        inputs.push_back({{"name", d.name}, {"sha256", d.sha256}});
    nlohmann::json j = {
        {"tool", kToolName},
        {"version", kToolVersion},
        {"subcommand", manifest.subcommand},
        {"timestamp", run_timestamp()},
        {"config", to_json(manifest.config)},
        {"inputs", inputs},
        {"outputs", manifest.outputs},
        {"options", manifest.options},
    };
    if (manifest.seed)
        j["seed"] = *manifest.seed;
    return j;
}

nlohmann::json to_json(const Resonance& r)
{
    return {
        {"center_wavelength_m", r.center_wavelength_m},
        {"fwhm_hz", r.fwhm_hz},
        {"extinction_db", r.extinction_db},
        {"q_loaded", r.q_loaded},
        {"q_int", r.q_int},
        {"q_ext", std::isfinite(r.q_ext) ? nlohmann::json(r.q_ext) : nlohmann::json("inf")},
        {"gamma_rad_per_s", r.gamma_hz},
        {"m_rad_per_s", r.m_hz},
        {"gamma_over_m", r.gamma_over_m()},
        {"coupling_branch", to_string(r.coupling_branch)},
    };
}

nlohmann::json to_json(const FitResult& fit)
{
    nlohmann::json params = nlohmann::json::object();
    for (std::size_t k = 0; k < fit.names.size(); ++k)
        params[fit.names[k]] = {{"value", fit.estimates[static_cast<Eigen::Index>(k)]},
                                {"sigma", fit.sigmas[static_cast<Eigen::Index>(k)]}};
    return {
        {"parameters", params},
        {"chi2", fit.chi2},
        {"chi2_reduced", fit.chi2_reduced},
        {"dof", fit.dof},
        {"converged", fit.converged},
        {"iterations", fit.iterations},
        {"termination", fit.termination},
    };
}

nlohmann::json to_json(const SfwmParams& p)
{
    return {
        {"eta_s", p.eta_s},   {"eta_i", p.eta_i},   {"gamma_eff", p.gamma_eff},
        {"beta_s", p.beta_s}, {"beta_i", p.beta_i}, {"delta", p.delta},
        {"dc_s", p.dc_s},     {"dc_i", p.dc_i},
    };
}

nlohmann::json to_json(const IntrinsicEstimate& e)
{
    return {
        {"value", e.value},           {"sigma_fit", e.sigma_fit},         {"sigma_loss", e.sigma_loss},
        {"sigma_total", e.sigma_total}, {"exceeds_unity", e.exceeds_unity},
    };
}

nlohmann::json to_json(const ResonanceFit& fit)
{
    return {
        {"resonance", to_json(fit.resonance)},
        {"q_loaded_sigma", fit.q_loaded_sigma},
        {"extinction_db_sigma", fit.extinction_db_sigma},
        {"t_min", fit.t_min},
        {"baseline", fit.baseline},
        {"self_coupling", fit.self_coupling},
        {"round_trip_amplitude", fit.round_trip_amplitude},
        {"fit", to_json(fit.fit)},
    };
}

nlohmann::json to_json(const SfwmFit& fit)
{
    nlohmann::json j = {
        {"mode", to_string(fit.mode)},
        {"params", to_json(fit.params)},
        {"sigmas", to_json(fit.sigmas)},
        {"gamma_eff_mpairs_per_s_per_mw2", fit.params.gamma_eff / kPairsPerMpair},
        {"intrinsic_heralding_s", to_json(fit.intrinsic_s)},
        {"intrinsic_heralding_i", to_json(fit.intrinsic_i)},
        {"rows_used", fit.rows_used},
        {"warnings", fit.warnings},
        {"fit", to_json(fit.fit)},
    };
    return j;
}

std::string dump_json(const nlohmann::json& value)
{
    return value.dump(2) + "\n";
}

} // namespace mrr
