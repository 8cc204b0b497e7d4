#pragma once

#include "mrr/cli.hpp"
#include "mrr/io.hpp"
#include "mrr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace mrr::test {

inline double rel_err(double value, double truth)
{
    return std::abs(value - truth) / std::abs(truth);
}

// Fresh directory under the build tree, removed first if present.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::current_path() / "test_scratch" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path data_dir()
{
    return std::filesystem::path(MRR_TEST_DATA_DIR);
}

struct CliRun
{
    int code = -1;
    std::string out;
    std::string err;
};

inline CliRun run(const std::vector<std::string>& args)
{
    std::ostringstream out;
    std::ostringstream err;
    CliRun r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Ground truth used across the count-fit tests.
inline SfwmParams reference_truth()
{
    SfwmParams p;
    p.eta_s = 0.18;
    p.eta_i = 0.19;
    p.gamma_eff = 2e6;
    p.beta_s = 2e4;
    p.beta_i = 2e4;
    p.delta = 1.0;
    p.dc_s = 100;
    p.dc_i = 100;
    return p;
}

inline SynthSpec reference_spec(std::uint64_t seed, std::size_t powers = 10)
{
    SynthSpec spec;
    spec.truth = reference_truth();
    for (std::size_t k = 0; k < powers; ++k)
        spec.powers_mw.push_back(0.01 + 0.49 * static_cast<double>(k) / static_cast<double>(powers - 1));
    spec.integration_s = 10.0;
    spec.rng_seed = seed;
    return spec;
}

// Self-coupling that gives the requested loaded Q with the config's round-trip loss.
inline double self_coupling_for_q(double q_loaded, const DeviceConfig& config)
{
    const double phase = angular_frequency(resonance_wavelength(config)) * round_trip_time(config);
    return std::sqrt(std::exp(-phase / q_loaded)) / round_trip_amplitude(config);
}

inline std::vector<std::string> tree(const std::filesystem::path& root)
{
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file())
            files.push_back(e.path().lexically_relative(root).generic_string());
    std::sort(files.begin(), files.end());
    return files;
}

inline std::filesystem::path inputs_dir()
{
    return data_dir() / "data" / "inputs";
}

// The command chains pinned by tests/golden: <dir>/single and <dir>/scenario.
// Returns the commands that did not exit 0.
inline std::vector<std::string> produce_golden_cases(const std::filesystem::path& dir)
{
    const std::filesystem::path single = dir / "single";
    const std::filesystem::path scenario = dir / "scenario";
    const std::vector<std::vector<std::string>> commands = {
        {"simulate", (inputs_dir() / "sweep_spec.txt").string(), "--out", (single / "sim").string()},
        {"fit-counts", (single / "sim" / "counts.csv").string(), "--out", (single / "fit" / "counts.json").string()},
        {"fit-resonance", (single / "sim" / "trace.csv").string(), "--out", (single / "fit" / "resonance.json").string(),
         "--residuals", (single / "fit" / "residuals.csv").string()},
        {"predict", "--points", "41", "--out", (single / "theory" / "curve.csv").string()},
        {"simulate", (inputs_dir() / "scenario_spec.txt").string(), "--out", (scenario / "sim").string()},
        {"sweep", (scenario / "sim").string(), "--out", (scenario / "sweep").string()},
    };
    std::vector<std::string> failed;
    for (const auto& args : commands)
        if (run(args).code != 0)
            failed.push_back(args.front());
    return failed;
}

inline bool update_golden_requested()
{
    const char* update = std::getenv("MRR_UPDATE_GOLDEN");
    return update && std::string(update) == "1";
}

// Files that differ between <produced>/<name> and tests/golden/<name>,
// including files present on one side only. MRR_UPDATE_GOLDEN=1 rewrites
// the golden copy instead.
inline std::vector<std::string> golden_mismatches(const std::filesystem::path& produced, const std::string& name)
{
    const std::filesystem::path golden = data_dir() / "golden" / name;
    if (update_golden_requested()) {
        std::filesystem::remove_all(golden);
        std::filesystem::create_directories(golden);
        std::filesystem::copy(produced / name, golden, std::filesystem::copy_options::recursive);
        return {};
    }
    if (!std::filesystem::is_directory(golden))
        return {golden.string() + " missing"};
    const auto want = tree(golden);
    const auto have = tree(produced / name);
    std::vector<std::string> bad;
    for (const auto& rel : want) {
        if (!std::binary_search(have.begin(), have.end(), rel))
            bad.push_back(name + "/" + rel + " not produced");
        else if (read_text_file(produced / name / rel) != read_text_file(golden / rel))
            bad.push_back(name + "/" + rel + " differs");
    }
    for (const auto& rel : have)
        if (!std::binary_search(want.begin(), want.end(), rel))
            bad.push_back(name + "/" + rel + " unexpected");
    return bad;
}

} // namespace mrr::test
