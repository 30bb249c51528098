// dmdxt: batch front-end for the DMD crosstalk simulator.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "dmdx/errors.hpp"
#include "dmdx/metrics.hpp"
#include "dmdx/scenario.hpp"

namespace fs = std::filesystem;
using namespace dmdx;

namespace {

struct Opts {
    std::string config;
    std::vector<unsigned long long> seeds;
    std::string out;
    int threads = 1;
    std::string run_dir;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << s;
}

struct Summary {
    std::string scenario;
    unsigned long long seed;
    std::string body;
    void add(const std::string& q, const std::string& v) {
        body += scenario + "\t" + std::to_string(seed) + "\t" + q + "\t" + v + "\n";
    }
    std::string text() const { return "scenario\tseed\tquantity\tvalue\n" + body; }
};

// I_X (dB) at each site relative to the addressed spot
std::vector<double> ix_db(const Train& t, const DmdPattern& p, const std::vector<double>& sites) {
    Field f = t.observe(p);
    auto [r0, c0] = t.sample_of(0);
    double peak = patch_intensity(f, r0, c0, t.setup().patch);
    std::vector<double> out;
    for (double a : sites) {
        auto [r, c] = t.sample_of(a);
        out.push_back(to_db(patch_intensity(f, r, c, t.setup().patch) / peak));
    }
    return out;
}

// small window of the observation field around the addressed spot
Field snapshot(const Field& f, int row, int col, int half = 128) {
    Field out(2 * half, 2 * half, f.pitch_x, f.pitch_y, f.plane);
    out.origin_x = f.x(col);
    out.origin_y = f.y(row);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c)
            out.at(r, c) = f.at((row - half + r + f.rows) % f.rows, (col - half + c + f.cols) % f.cols);
    return out;
}

std::vector<double> probe_sites(const RunConfig& rc) {
    std::vector<double> s = rc.sites;
    if (std::find(s.begin(), s.end(), rc.residual_site) == s.end()) s.insert(s.begin(), rc.residual_site);
    return s;
}

fs::path run_path(const RunConfig& rc, unsigned long long seed) {
    fs::path p = fs::path(rc.output_dir) / rc.scenario / ("seed_" + std::to_string(seed));
    fs::create_directories(p);
    return p;
}

std::string dprime_text(const std::optional<double>& d, double wp) { return d ? fmt("%.3f", *d / wp) : "none"; }

int cmd_simulate(const RunConfig& rc) {
    IftaResult design = design_for(rc);
    Geometry g = Geometry::from(rc.optics);
    for (auto seed : rc.seeds) {
        Scenario sc = build_scenario(rc, seed, design);
        fs::path dir = run_path(rc, seed);
        Summary sum{rc.scenario, seed, ""};
        sum.add("residual_rms_rad", fmt("%.4f", sc.residual_rms));
        auto sites = probe_sites(rc);
        Train single(sc.setup);
        auto ip1 = ix_db(single, sc.primary, sites);
        for (size_t i = 0; i < sites.size(); ++i) sum.add("ip1_I_X_dB@" + fmt("%.3f", sites[i]), fmt("%.2f", ip1[i]));

        std::optional<PupilSpec> pupil;
        if (rc.pupil_d_waists) pupil = centred_pupil(g, *rc.pupil_d_waists * rc.waist);
        auto res = simulate_double_pass(sc.setup, sc.primary, pupil, rc.stray_floor, rc.threshold_db);
        TrainSetup ds = sc.setup;
        ds.double_pass = true;
        Train dbl(ds);
        DmdPattern pp = with_pupil(sc.primary, pupil, g.pitch);
        auto ip2 = ix_db(dbl, pp, sites);
        for (size_t i = 0; i < sites.size(); ++i) sum.add("ip2_I_X_dB@" + fmt("%.3f", sites[i]), fmt("%.2f", ip2[i]));
        if (rc.pupil_d_waists) sum.add("pupil_d_w", fmt("%.3f", *rc.pupil_d_waists));
        sum.add("d_prime_wp", dprime_text(res.effective_aperture, res.waist_ip2));

        write_text(dir / "summary.tsv", sum.text());
        write_text(dir / "profile_ip2.tsv", profile_table(res.profile, res.waist_ip2));
        write_field(snapshot(res.field_ip2, res.profile.peak_row, res.profile.peak_col), (dir / "field_ip2.cfld").string());
        std::cout << dir.string() << "\n";
    }
    return 0;
}

int cmd_optimize(const RunConfig& rc) {
    IftaResult design = design_for(rc);
    OptimizeOptions opt = rc.scans;
    for (auto seed : rc.seeds) {
        Scenario sc = build_scenario(rc, seed, design);
        fs::path dir = run_path(rc, seed);
        Summary sum{rc.scenario, seed, ""};
        sum.add("residual_rms_rad", fmt("%.4f", sc.residual_rms));
        OptimizeResult r;
        DmdPattern pattern;
        if (rc.train == "double") {
            auto cr = combined_pipeline(sc.setup, sc.primary, rc.sites,
                                        rc.pupil_d_waists ? std::optional<double>(*rc.pupil_d_waists * rc.waist)
                                                          : std::nullopt,
                                        opt, rc.stray_floor);
            r = cr.optimized;
            pattern = cr.pattern;
            sum.add("d_prime_wp", dprime_text(cr.result.effective_aperture, cr.result.waist_ip2));
            write_text(dir / "profile_ip2.tsv", profile_table(cr.result.profile, cr.result.waist_ip2));
        } else {
            TrainSystem sys(std::make_shared<const Train>(sc.setup), sc.primary);
            r = optimize_sites(sys, rc.sites, opt);
            pattern = sys.pattern(r.specs);
        }
        for (const auto& p : r.plans) {
            sum.add("before_dB@" + fmt("%.3f", p.site), fmt("%.2f", p.before_db));
            sum.add("after_dB@" + fmt("%.3f", p.site), fmt("%.2f", p.after_db));
        }
        write_text(dir / "summary.tsv", sum.text());
        write_text(dir / "plans.tsv", plan_table(r.plans));
        write_text(dir / "scans.tsv", scan_table(r.traces));
        write_pattern(pattern, (dir / "pattern.dmd").string());
        std::cout << dir.string() << "\n";
    }
    return 0;
}

int cmd_sweep(const RunConfig& rc, int threads) {
    if (rc.sweep_d_waists.empty()) throw ConfigError("sweep.d_waists: sweep needs at least one value");
    IftaResult design = design_for(rc);
    for (auto seed : rc.seeds) {
        Scenario sc = build_scenario(rc, seed, design);
        fs::path dir = run_path(rc, seed);
        std::vector<double> d;
        for (double v : rc.sweep_d_waists) d.push_back(v * rc.waist);
        auto pts = aperture_sweep(sc.setup, sc.primary, d, rc.stray_floor, threads, rc.threshold_db);
        auto open = simulate_double_pass(sc.setup, sc.primary, std::nullopt, rc.stray_floor, rc.threshold_db);
        const double wp = open.waist_ip2;
        std::string t = "d_w\td_prime_wp\n";
        t += "open\t" + dprime_text(open.effective_aperture, wp) + "\n";
        Summary sum{rc.scenario, seed, ""};
        sum.add("d_prime_wp@open", dprime_text(open.effective_aperture, wp));
        for (const auto& p : pts) {
            t += fmt("%.3f", p.d / rc.waist) + "\t" + dprime_text(p.d_prime, wp) + "\n";
            sum.add("d_prime_wp@" + fmt("%.3f", p.d / rc.waist), dprime_text(p.d_prime, wp));
        }
        write_text(dir / "sweep.tsv", t);
        write_text(dir / "summary.tsv", sum.text());
        std::cout << dir.string() << "\n";
    }
    return 0;
}

int cmd_report(const std::string& run_dir) {
    if (!fs::is_directory(run_dir)) {
        std::cerr << "missing: " << run_dir << " (not a directory)\n";
        return 1;
    }
    std::vector<fs::path> found;
    std::vector<std::string> missing;
    for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
        if (e.is_regular_file() && e.path().filename() == "summary.tsv") found.push_back(e.path());
        // a seed directory without its summary is an interrupted run
        if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 &&
            !fs::exists(e.path() / "summary.tsv"))
            missing.push_back((e.path() / "summary.tsv").string());
    }
    if (found.empty()) missing.push_back("no summary.tsv under " + run_dir);
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        for (const auto& m : missing) std::cerr << "missing: " << m << "\n";
        return 1;
    }
    std::sort(found.begin(), found.end());
    // scenario -> seed -> lines, so output order does not depend on directory walk order
    std::map<std::string, std::map<unsigned long long, std::vector<std::string>>> rows;
    for (const auto& f : found) {
        std::ifstream is(f);
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string scen, seed;
            std::getline(ls, scen, '\t');
            std::getline(ls, seed, '\t');
            rows[scen][std::stoull(seed)].push_back(line);
        }
    }
    std::string out = "scenario\tseed\tquantity\tvalue\n";
    for (auto& [scen, seeds] : rows)
        for (auto& [seed, lines] : seeds)
            for (const auto& l : lines) out += l + "\n";
    write_text(fs::path(run_dir) / "report.txt", out);
    std::cout << out;
    return 0;
}

RunConfig load(const Opts& o) {
    RunConfig rc = load_config(o.config);
    if (!o.seeds.empty()) rc.seeds = o.seeds;
    if (!o.out.empty()) rc.output_dir = o.out;
    rc.validate();
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DMD double-pass crosstalk simulator"};
    app.require_subcommand(1);
    Opts o;
    auto add_common = [&](CLI::App* c) {
        c->add_option("--config", o.config, "config file (JSON)")->required()->check(CLI::ExistingFile);
        c->add_option("--seed", o.seeds, "seed(s), replaces the config list");
        c->add_option("--out", o.out, "output directory");
        c->add_option("--threads", o.threads, "worker threads (0 = auto)")->check(CLI::NonNegativeNumber);
    };
    auto* sim = app.add_subcommand("simulate", "double-pass simulation, profile and I_X summary");
    auto* optc = app.add_subcommand("optimize", "multi-site scan-and-fit optimisation");
    auto* sw = app.add_subcommand("sweep", "effective aperture d' against pupil size d");
    auto* rep = app.add_subcommand("report", "collate summary.tsv files under a run directory");
    for (auto* c : {sim, optc, sw}) add_common(c);
    rep->add_option("run_dir", o.run_dir, "directory with earlier outputs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (o.threads == 0) o.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    try {
        if (*rep) return cmd_report(o.run_dir);
        RunConfig rc = load(o);
        if (*sim) return cmd_simulate(rc);
        if (*optc) return cmd_optimize(rc);
        if (*sw) return cmd_sweep(rc, o.threads);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const RuleViolation& e) {
        std::cerr << "rule violation: " << e.what() << "\n";
        return 3;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
