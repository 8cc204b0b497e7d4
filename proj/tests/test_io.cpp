#include "mrr/error.hpp"
#include "mrr/io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fmt/format.h>
#include <fstream>

using namespace mrr;
using doctest::Approx;

TEST_SUITE("io")
{
    TEST_CASE("number formatting round-trips")
    {
        for (double v : {0.1, 1.0 / 3.0, 1.5501200045029973e-06, 2e6, 0.0, -7.25})
            CHECK(std::stod(format_number(v)) == v);
        CHECK(format_number(0.5) == "0.5");
    }

    TEST_CASE("sha256 of a known string")
    {
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    TEST_CASE("config parsing")
    {
        const ConfigLoad load = parse_config("# chip\n group_index = 4.0 \n\nfsr_hz=1.07e11 # measured\n", "dev.conf");
        CHECK(load.config.group_index == 4.0);
        CHECK(load.config.fsr_hz == 1.07e11);
        CHECK_FALSE(load.phase_from_file);
        CHECK(load.key_lines.at("fsr_hz") == 4);
        CHECK(parse_config("phase_offset_rad = 0.1\n", "x").phase_from_file);
        CHECK(config_keys().size() == 15);
    }

    TEST_CASE("resolve_config precedence and recalibration")
    {
        const auto dir = test::scratch_dir("resolve_config");
        write_text_file(dir / "dev.conf", "round_trip_transmission = 0.95\neta_gc = 0.6\n");

        const DeviceConfig defaults = resolve_config(std::nullopt, {});
        CHECK(defaults.phase_offset_rad == DeviceConfig{}.phase_offset_rad);

        const DeviceConfig file = resolve_config(dir / "dev.conf", {});
        CHECK(file.eta_gc == 0.6);
        // Loss changed and no phase keys: calibration is redone for the new loss.
        CHECK(file.phase_offset_rad != DeviceConfig{}.phase_offset_rad);
        const double a = round_trip_amplitude(file);
        const double t = self_coupling(coupling_from_phase(phase_from_voltage(1.45, file)), file);
        CHECK(t == Approx(a).epsilon(1e-9));

        const DeviceConfig flag = resolve_config(dir / "dev.conf", {"eta_gc=0.7", "phase_offset_rad = 0.2"});
        CHECK(flag.eta_gc == 0.7);
        CHECK(flag.phase_offset_rad == 0.2);

        CHECK_THROWS_AS(resolve_config(dir / "dev.conf", {"eta_gc"}), InputError);
        CHECK_THROWS_AS(resolve_config(dir / "missing.conf", {}), InputError);
    }

    TEST_CASE("config json echoes every key")
    {
        const auto j = to_json(DeviceConfig{});
        CHECK(j.size() == config_keys().size());
        CHECK(j.at("group_index").get<double>() == 4.2);
    }

    TEST_CASE("count CSV round trip")
    {
        CountSweep s;
        s.rows = {{0.01, 10, 1234.5, 1300.1, 12.3}, {0.2, 10, 98765.4, 99999.9, 2345.6}};
        const CountSweep back = parse_count_csv(format_count_csv(s), "mem.csv");
        REQUIRE(back.rows.size() == 2);
        CHECK(back.rows[1].c_i == 99999.9);
        CHECK(back.rows[0].cc == 12.3);
    }

    TEST_CASE("CSV columns may be reordered and carry extras; CRLF accepted")
    {
        const CountSweep s = parse_count_csv("cc,c_i,c_s,note,integration_s,power_mw\r\n1,2,3,x,1,0.1\r\n", "mem.csv");
        REQUIRE(s.rows.size() == 1);
        CHECK(s.rows[0].cc == 1);
        CHECK(s.rows[0].c_s == 3);
        CHECK(s.rows[0].power_mw == 0.1);
    }

    TEST_CASE("trace CSV round trip")
    {
        ResonanceTrace t;
        t.wavelength_m = {1550.0e-9, 1550.1e-9, 1550.2e-9};
        t.transmission = {0.99, 0.5, 0.98};
        const ResonanceTrace back = parse_trace_csv(format_trace_csv(t), "mem.csv");
        REQUIRE(back.wavelength_m.size() == 3);
        CHECK(back.wavelength_m[1] == Approx(1550.1e-9).epsilon(1e-15));
        CHECK(back.transmission[1] == 0.5);
    }

    TEST_CASE("simulation spec parsing")
    {
        const SimulationSpec s = parse_simulation_spec(
            "seed = 18446744073709551615\npowers_mw = 0.1, 0.2,0.3\nvoltages = default\ngamma_eff = 3e6\nnoiseless = true\n",
            "spec.txt");
        CHECK(s.has_seed);
        CHECK(s.synth.rng_seed == 18446744073709551615ull);
        CHECK(s.synth.powers_mw.size() == 3);
        CHECK(s.synth.voltages.size() == 33);
        CHECK(s.synth.truth.gamma_eff == 3e6);
        CHECK(s.synth.noiseless);
        CHECK_FALSE(parse_simulation_spec("eta_s = 0.1\n", "s").has_seed);
        CHECK_THROWS_AS(parse_simulation_spec("colour = blue\n", "s"), InputError);
    }

    TEST_CASE("timestamp honours SOURCE_DATE_EPOCH")
    {
        setenv("SOURCE_DATE_EPOCH", "86400", 1);
        CHECK(run_timestamp() == "1970-01-02T00:00:00Z");
        setenv("SOURCE_DATE_EPOCH", "0", 1);
    }

    TEST_CASE("reports")
    {
        const Resonance r = make_resonance(1550e-9, 2e5, std::numeric_limits<double>::infinity(), 0.0,
                                           CouplingBranch::UnderCoupled);
        const auto j = to_json(r);
        CHECK(j.at("q_ext") == "inf");
        CHECK(j.at("coupling_branch") == "under");
        RunManifest m;
        m.subcommand = "predict";
        m.seed = 7;
        const auto mj = to_json(m);
        CHECK(mj.at("tool") == "mrrtool");
        CHECK(mj.at("seed") == 7);
        CHECK(mj.at("config").size() == config_keys().size());
    }

    TEST_CASE("malformed corpus is rejected with file, line and field")
    {
        const auto dir = test::data_dir() / "data" / "malformed";
        std::ifstream listing(dir / "expected.txt");
        REQUIRE(listing);
        std::string line;
        int cases = 0;
        while (std::getline(listing, line)) {
            if (line.empty())
                continue;
            std::vector<std::string> f;
            std::size_t start = 0;
            for (std::size_t pos; (pos = line.find('|', start)) != std::string::npos; start = pos + 1)
                f.push_back(line.substr(start, pos - start));
            f.push_back(line.substr(start));
            REQUIRE(f.size() == 4);
            const auto path = dir / f[1];
            CAPTURE(line);
            std::string message;
            try {
                if (f[0] == "counts")
                    read_count_csv(path);
                else if (f[0] == "trace")
                    read_trace_csv(path);
                else if (f[0] == "config")
                    resolve_config(path, {});
                else {
                    const SimulationSpec s = parse_simulation_spec(read_text_file(path), path.string());
                    if (!s.has_seed)
                        throw InputError(fmt::format("{}: field 'seed': missing", path.string()));
                }
                FAIL("accepted malformed input " << f[1]);
            } catch (const InputError& e) {
                message = e.what();
            }
            CAPTURE(message);
            CHECK(message.find(f[1]) != std::string::npos);
            if (f[2] != "0")
                CHECK(message.find(f[1] + ":" + f[2] + ":") != std::string::npos);
            if (f[3] != "-")
                CHECK(message.find("'" + f[3] + "'") != std::string::npos);
            ++cases;
        }
        CHECK(cases >= 20);
    }
}
