#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "dmdx/errors.hpp"
#include "dmdx/scenario.hpp"

using namespace dmdx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run(const std::string& args) {
    std::string cmd = std::string(DMDXT_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("dmdxt_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

const std::string kSmall = std::string(TEST_DATA_DIR) + "/small.json";

}  // namespace

TEST_CASE("config load and re-serialize is idempotent") {
    RunConfig a = load_config(kSmall);
    std::string once = dump_config(a);
    std::string twice = dump_config(parse_config(once));
    CHECK(once == twice);
    CHECK(a.optics.dmd_rows == 512);
    CHECK(a.waist == doctest::Approx(60e-6));
    CHECK(a.pupil_d_waists.value() == doctest::Approx(6.0));
    // defaults also round-trip
    CHECK(dump_config(parse_config(dump_config(RunConfig{}))) == dump_config(RunConfig{}));
}

TEST_CASE("config errors name the offending key") {
    auto msg = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(msg(R"({"version": 1, "optics": {"wavelenght_nm": 370}})").find("optics.wavelenght_nm") !=
          std::string::npos);
    CHECK(msg(R"({"version": 2})").find("version") != std::string::npos);
    CHECK(msg(R"({"version": 1, "target": {"waist_um": -3}})").find("waist") != std::string::npos);
    CHECK(msg(R"({"version": 1, "sites": ["a"]})").find("sites") != std::string::npos);
    CHECK(msg("{ not json").find("no error") == std::string::npos);
}

TEST_CASE("cli exit codes") {
    fs::path d = scratch_dir("codes");
    CHECK(run("") != 0);
    CHECK(run("simulate") == 2);
    CHECK(run("simulate --config " + (d / "missing.json").string()) == 2);
    std::ofstream(d / "bad.json") << R"({"version": 1, "bogus": 1})";
    CHECK(run("simulate --config " + (d / "bad.json").string()) == 2);
    // nine sites need nine holograms
    std::ofstream(d / "many.json") << R"({"version": 1, "optics": {"dmd_rows": 512, "dmd_cols": 640,
        "fp1_cols": 512, "ip1_cols": 128, "illumination_waist_mm": 3.0}, "target": {"waist_um": 60},
        "aberration": {"residual_rms_rad": 0.6, "radius_mm": 1.0},
        "hologram": {"window_cols": 60, "ifta_iterations": 5},
        "sites": [1, 2, 3, 4, 5, 6, 7, 8, 9]})";
    CHECK(run("optimize --config " + (d / "many.json").string() + " --out " + (d / "o").string()) == 4);
    CHECK(run("report " + (d / "nothing").string()) != 0);
}

TEST_CASE("reruns are byte-identical and report collates sorted rows") {
    fs::path a = scratch_dir("run_a"), b = scratch_dir("run_b");
    for (const auto& out : {a, b}) {
        REQUIRE(run("simulate --config " + kSmall + " --out " + out.string()) == 0);
        REQUIRE(run("optimize --config " + kSmall + " --seed 2 --out " + out.string() + "/opt") == 0);
        REQUIRE(run("sweep --config " + kSmall + " --seed 1 --threads 2 --out " + out.string() + "/sw") == 0);
    }
    auto ta = tree(a), tb = tree(b);
    CHECK(ta.size() >= 8);
    CHECK(ta == tb);
    CHECK(ta.count("small/seed_1/summary.tsv") == 1);
    CHECK(ta.count("small/seed_2/profile_ip2.tsv") == 1);
    CHECK(ta.count("opt/small/seed_2/plans.tsv") == 1);
    CHECK(ta.count("sw/small/seed_1/sweep.tsv") == 1);

    REQUIRE(run("report " + a.string()) == 0);
    std::string rep = slurp(a / "report.txt");
    CHECK(rep.find("scenario\tseed\tquantity\tvalue") == 0);
    // rows are sorted by seed within the scenario
    CHECK(rep.find("small\t1\t") < rep.find("small\t2\t"));
    // a run directory without its summary is reported missing
    fs::remove(a / "small/seed_1/summary.tsv");
    CHECK(run("report " + a.string()) == 1);
}
