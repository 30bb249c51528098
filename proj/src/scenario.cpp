#include "dmdx/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dmdx/errors.hpp"
#include "dmdx/metrics.hpp"
#include "dmdx/rng.hpp"

namespace dmdx {

using json = nlohmann::ordered_json;

void RunConfig::validate() const {
    if (version != 1) throw ConfigError("version: only version 1 is understood");
    optics.validate();
    if (!(waist > 0)) throw ConfigError("target.waist_um must be positive");
    if (carrier_period < 2) throw ConfigError("target.carrier_period must be >= 2");
    std::set<double> s(sites.begin(), sites.end());
    if (s.size() != sites.size()) throw ConfigError("sites must be distinct");
    if (s.count(0.0)) throw ConfigError("sites: 0 is the addressed spot");
    if (static_cast<int>(sites.size()) > hologram.max_holograms)
        throw CapacityError("sites: at most " + std::to_string(hologram.max_holograms) + " secondary holograms");
    if (pupil_d_waists && !(*pupil_d_waists > 0)) throw ConfigError("pupil.d_waists must be positive");
    if (train != "single" && train != "double") throw ConfigError("train must be \"single\" or \"double\"");
    if (!(characterized_rms_waves >= 0)) throw ConfigError("aberration.characterized_rms_waves must be >= 0");
    if (residual_rms_rad && !(*residual_rms_rad >= 0)) throw ConfigError("aberration.residual_rms_rad must be >= 0");
    if (!(aberration_radius > 0)) throw ConfigError("aberration.radius_mm must be positive");
    if (!(relay_rms_rad >= 0)) throw ConfigError("relay.aberration_rms_rad must be >= 0");
    if (!(stray_floor >= 0)) throw ConfigError("relay.stray_floor must be >= 0");
    if (hologram.window_rows < 1 || hologram.window_cols < 1) throw ConfigError("hologram window must be >= 1x1");
    if (hologram.guard_rows < 0) throw ConfigError("hologram.guard_rows must be >= 0");
    if (!(hologram.amplitude_floor > 0 && hologram.amplitude_floor < 1))
        throw ConfigError("hologram.amplitude_floor must lie in (0, 1)");
    if (!(hologram.taper >= 0 && hologram.taper <= 0.5)) throw ConfigError("hologram.taper must lie in [0, 0.5]");
    if (ifta_iterations < 1) throw ConfigError("hologram.ifta_iterations must be >= 1");
    if (scans.phase_points < 8) throw ConfigError("scans.phase_points must be >= 8");
    if (scans.refine_rounds < 1) throw ConfigError("scans.refine_rounds must be >= 1");
    if (scans.amplitude_points < 6) throw ConfigError("scans.amplitude_points must be >= 6");
    if (!(scans.amplitude_max > 0 && scans.amplitude_max <= 1)) throw ConfigError("scans.amplitude_max in (0, 1]");
    if (patch < 1 || patch % 2 == 0) throw ConfigError("scans.patch must be odd");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    for (size_t i = 1; i < sweep_d_waists.size(); ++i)
        if (sweep_d_waists[i] < sweep_d_waists[i - 1]) throw ConfigError("sweep.d_waists must be ascending");
    for (double d : sweep_d_waists)
        if (!(d > 0)) throw ConfigError("sweep.d_waists must be positive");
}

namespace {

// strict reader: every key must be known, every value the right type
struct Reader {
    const json& j;
    std::string path;
    std::set<std::string> seen;

    Reader(const json& node, std::string p) : j(node), path(std::move(p)) {
        if (!j.is_object()) throw ConfigError(path + ": expected an object");
    }
    std::string key(const std::string& k) const { return path.empty() ? k : path + "." + k; }
    bool has(const std::string& k) {
        seen.insert(k);
        return j.contains(k) && !j.at(k).is_null();
    }
    template <class T>
    void get(const std::string& k, T& out) {
        if (!has(k)) return;
        try {
            out = j.at(k).get<T>();
        } catch (const std::exception&) {
            throw ConfigError(key(k) + ": wrong type");
        }
    }
    void num(const std::string& k, double& out, double scale = 1.0) {
        if (!has(k)) return;
        if (!j.at(k).is_number()) throw ConfigError(key(k) + ": expected a number");
        out = j.at(k).get<double>() * scale;
    }
    void integer(const std::string& k, int& out) {
        if (!has(k)) return;
        if (!j.at(k).is_number_integer()) throw ConfigError(key(k) + ": expected an integer");
        out = j.at(k).get<int>();
    }
    void flag(const std::string& k, bool& out) {
        if (!has(k)) return;
        if (!j.at(k).is_boolean()) throw ConfigError(key(k) + ": expected true or false");
        out = j.at(k).get<bool>();
    }
    Reader sub(const std::string& k) {
        seen.insert(k);
        return Reader(j.at(k), key(k));
    }
    void finish() const {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!seen.count(it.key())) throw ConfigError(key(it.key()) + ": unknown key");
    }
};

std::vector<double> num_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected a list of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw ConfigError(where + ": expected a list of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    Reader top(j, "");
    top.integer("version", c.version);
    if (c.version != 1) throw ConfigError("version: only version 1 is understood");
    top.get("scenario", c.scenario);
    if (top.has("optics")) {
        Reader o = top.sub("optics");
        auto& op = c.optics;
        o.num("wavelength_nm", op.wavelength, 1e-9);
        o.num("focal_length_mm", op.focal_length_f, 1e-3);
        o.num("dmd_pitch_um", op.dmd_pitch, 1e-6);
        o.integer("dmd_rows", op.dmd_rows);
        o.integer("dmd_cols", op.dmd_cols);
        o.integer("fp1_cols", op.fp1_cols);
        o.integer("ip1_cols", op.ip1_cols);
        o.num("illumination_waist_mm", op.illumination_waist, 1e-3);
        o.num("relay_magnification", op.relay_magnification);
        o.integer("superpixel", op.superpixel);
        o.num("detector_floor_db", op.detector_floor_db);
        o.num("padding", op.padding);
        o.num("as2_orders", op.as2_orders);
        std::string shape = op.as2_shape == StopShape::Circle ? "circle" : "square";
        o.get("as2_shape", shape);
        if (shape == "circle") op.as2_shape = StopShape::Circle;
        else if (shape == "square") op.as2_shape = StopShape::Square;
        else throw ConfigError("optics.as2_shape: circle or square");
        o.finish();
    }
    if (top.has("target")) {
        Reader t = top.sub("target");
        t.num("waist_um", c.waist, 1e-6);
        t.integer("carrier_period", c.carrier_period);
        t.finish();
    }
    if (top.has("sites")) {
        top.seen.insert("sites");
        c.sites = num_list(j.at("sites"), "sites");
    }
    if (top.has("pupil")) {
        Reader p = top.sub("pupil");
        double d = 0;
        if (!p.has("d_waists")) throw ConfigError("pupil.d_waists is required when pupil is given");
        p.num("d_waists", d);
        c.pupil_d_waists = d;
        p.finish();
    }
    top.get("train", c.train);
    if (top.has("aberration")) {
        Reader a = top.sub("aberration");
        a.num("characterized_rms_waves", c.characterized_rms_waves);
        if (a.has("residual_rms_rad")) {
            double v = 0;
            a.num("residual_rms_rad", v);
            c.residual_rms_rad = v;
        }
        a.num("residual_target_db", c.residual_target_db);
        a.num("residual_site", c.residual_site);
        a.num("radius_mm", c.aberration_radius, 1e-3);
        a.finish();
    }
    if (top.has("relay")) {
        Reader r = top.sub("relay");
        r.num("aberration_rms_rad", c.relay_rms_rad);
        r.get("seed", c.relay_seed);
        r.num("stray_floor", c.stray_floor);
        r.finish();
    }
    if (top.has("hologram")) {
        Reader h = top.sub("hologram");
        auto& ho = c.hologram;
        h.integer("window_rows", ho.window_rows);
        h.integer("window_cols", ho.window_cols);
        h.integer("guard_rows", ho.guard_rows);
        h.integer("window_row_offset", ho.window_row_offset);
        h.num("amplitude_floor", ho.amplitude_floor);
        h.num("taper", ho.taper);
        h.flag("lock_thresholds", ho.lock_thresholds);
        std::string q = ho.primary_quantizer == Quantizer::ErrorDiffusion ? "error_diffusion" : "random";
        h.get("primary_quantizer", q);
        if (q == "error_diffusion") ho.primary_quantizer = Quantizer::ErrorDiffusion;
        else if (q == "random") ho.primary_quantizer = Quantizer::Random;
        else throw ConfigError("hologram.primary_quantizer: error_diffusion or random");
        h.integer("ifta_iterations", c.ifta_iterations);
        h.finish();
    }
    if (top.has("scans")) {
        Reader s = top.sub("scans");
        s.integer("phase_points", c.scans.phase_points);
        s.integer("amplitude_points", c.scans.amplitude_points);
        s.num("amplitude_max", c.scans.amplitude_max);
        s.flag("resweep", c.scans.resweep);
        s.integer("refine_rounds", c.scans.refine_rounds);
        s.num("reference_amplitude", c.scans.reference_amplitude);
        s.integer("patch", c.patch);
        s.num("threshold_db", c.threshold_db);
        s.finish();
    }
    if (top.has("sweep")) {
        Reader s = top.sub("sweep");
        if (s.has("d_waists")) c.sweep_d_waists = num_list(s.j.at("d_waists"), "sweep.d_waists");
        s.finish();
    }
    if (top.has("seeds")) {
        top.seen.insert("seeds");
        const auto& s = j.at("seeds");
        if (!s.is_array()) throw ConfigError("seeds: expected a list of integers");
        c.seeds.clear();
        for (const auto& v : s) {
            if (!v.is_number_unsigned()) throw ConfigError("seeds: expected non-negative integers");
            c.seeds.push_back(v.get<unsigned long long>());
        }
    }
    top.get("output_dir", c.output_dir);
    top.finish();
    c.hologram.max_holograms = c.scans.max_holograms;
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

// unit conversions are printed at 12 significant digits so that a
// load/dump cycle does not drift in the last bit
double in_units(double v, double scale) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v * scale);
    return std::strtod(buf, nullptr);
}

std::string dump_config(const RunConfig& c) {
    json j;
    j["version"] = c.version;
    j["scenario"] = c.scenario;
    const auto& o = c.optics;
    j["optics"] = {{"wavelength_nm", in_units(o.wavelength, 1e9)},
                   {"focal_length_mm", in_units(o.focal_length_f, 1e3)},
                   {"dmd_pitch_um", in_units(o.dmd_pitch, 1e6)},
                   {"dmd_rows", o.dmd_rows},
                   {"dmd_cols", o.dmd_cols},
                   {"fp1_cols", o.fp1_cols},
                   {"ip1_cols", o.ip1_cols},
                   {"illumination_waist_mm", in_units(o.illumination_waist, 1e3)},
                   {"relay_magnification", o.relay_magnification},
                   {"superpixel", o.superpixel},
                   {"detector_floor_db", o.detector_floor_db},
                   {"padding", o.padding},
                   {"as2_orders", o.as2_orders},
                   {"as2_shape", o.as2_shape == StopShape::Circle ? "circle" : "square"}};
    j["target"] = {{"waist_um", in_units(c.waist, 1e6)}, {"carrier_period", c.carrier_period}};
    j["sites"] = c.sites;
    if (c.pupil_d_waists) j["pupil"] = {{"d_waists", *c.pupil_d_waists}};
    j["train"] = c.train;
    json ab = {{"characterized_rms_waves", c.characterized_rms_waves}};
    if (c.residual_rms_rad) ab["residual_rms_rad"] = *c.residual_rms_rad;
    ab["residual_target_db"] = c.residual_target_db;
    ab["residual_site"] = c.residual_site;
    ab["radius_mm"] = in_units(c.aberration_radius, 1e3);
    j["aberration"] = ab;
    j["relay"] = {{"aberration_rms_rad", c.relay_rms_rad}, {"seed", c.relay_seed}, {"stray_floor", c.stray_floor}};
    const auto& h = c.hologram;
    j["hologram"] = {{"window_rows", h.window_rows},
                     {"window_cols", h.window_cols},
                     {"guard_rows", h.guard_rows},
                     {"window_row_offset", h.window_row_offset},
                     {"amplitude_floor", h.amplitude_floor},
                     {"taper", h.taper},
                     {"lock_thresholds", h.lock_thresholds},
                     {"primary_quantizer", h.primary_quantizer == Quantizer::ErrorDiffusion ? "error_diffusion" : "random"},
                     {"ifta_iterations", c.ifta_iterations}};
    j["scans"] = {{"phase_points", c.scans.phase_points},
                  {"amplitude_points", c.scans.amplitude_points},
                  {"amplitude_max", c.scans.amplitude_max},
                  {"resweep", c.scans.resweep},
                  {"refine_rounds", c.scans.refine_rounds},
                  {"reference_amplitude", c.scans.reference_amplitude},
                  {"patch", c.patch},
                  {"threshold_db", c.threshold_db}};
    j["sweep"] = {{"d_waists", c.sweep_d_waists}};
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    return j.dump(2) + "\n";
}

// ---------------- scenarios

IftaResult design_for(const RunConfig& rc) {
    Geometry g = Geometry::from(rc.optics);
    Field illum = gaussian_illumination(rc.optics, g.rows, g.fp1);
    return ifta_baseband(make_target(rc.optics, rc.waist, rc.carrier_period), illum, rc.optics, rc.ifta_iterations);
}

double tune_residual(const TrainSetup& base, const AberrationMap& unit, const DmdPattern& primary, double site,
                     double target_db, double hi, int steps) {
    auto ix_at = [&](double rms) {
        TrainSetup s = base;
        s.double_pass = false;
        AberrationMap r = unit;
        for (auto& v : r.phase.v) v *= rms;
        s.aberration = add_maps(base.compensation, r);
        Train t(s);
        Field f = t.observe(primary);
        auto [row, col] = t.sample_of(site);
        auto [r0, c0] = t.sample_of(0);
        return to_db(patch_intensity(f, row, col, s.patch) / patch_intensity(f, r0, c0, s.patch));
    };
    double lo = 0;
    if (ix_at(hi) < target_db) return hi;
    for (int k = 0; k < steps; ++k) {
        double mid = 0.5 * (lo + hi);
        if (ix_at(mid) < target_db) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

Scenario build_scenario(const RunConfig& rc, unsigned long long seed, const IftaResult& design) {
    rc.validate();
    Geometry g = Geometry::from(rc.optics);
    Scenario sc;
    TrainSetup& s = sc.setup;
    s.cfg = rc.optics;
    s.target = make_target(rc.optics, rc.waist, rc.carrier_period);
    s.illum = gaussian_illumination(rc.optics, g.rows, g.fp1);
    s.hopt = rc.hologram;
    s.seed = seed;
    s.patch = rc.patch;
    s.stray_seed = mix_seed(seed, 3);

    AberrationRecipe comp;
    comp.rms = rc.characterized_rms_waves * 2 * M_PI;
    comp.radius = rc.aberration_radius;
    comp.seed = mix_seed(seed, 1);
    s.compensation = synth_aberration(g.rows, g.fp1, g.pitch, comp);
    s.compensation.description = "characterised: " + s.compensation.description;

    sc.primary = primary_from_design(design, s.target, s.illum, s.compensation, seed, rc.optics, rc.hologram);

    AberrationRecipe res;
    res.rms = 1.0;
    res.radius = rc.aberration_radius;
    res.seed = mix_seed(seed, 2);
    AberrationMap unit = synth_aberration(g.rows, g.fp1, g.pitch, res);
    s.aberration = s.compensation;  // placeholder for tuning
    sc.residual_rms = rc.residual_rms_rad ? *rc.residual_rms_rad
                                          : tune_residual(s, unit, sc.primary, rc.residual_site, rc.residual_target_db);
    for (auto& v : unit.phase.v) v *= sc.residual_rms;
    unit.description = "residual: " + unit.description;
    s.aberration = add_maps(s.compensation, unit);

    Stop as2 = default_as2(rc.optics);
    s.as2 = as2;
    if (rc.relay_rms_rad > 0) {
        AberrationRecipe rr;
        rr.rms = rc.relay_rms_rad;
        rr.radius = as2.radius;
        rr.seed = rc.relay_seed;
        double p_fp2 = rc.optics.wavelength * rc.optics.focal_length_f / (g.n * g.du);
        s.relay = synth_aberration(g.n, g.n, p_fp2, rr);
        s.relay->description = "relay: " + s.relay->description;
    }

    Train t(s);
    Field f = t.observe(sc.primary);
    auto [row, col] = t.sample_of(rc.residual_site);
    auto [r0, c0] = t.sample_of(0);
    sc.baseline_db = to_db(patch_intensity(f, row, col, s.patch) / patch_intensity(f, r0, c0, s.patch));
    return sc;
}

}  // namespace dmdx
