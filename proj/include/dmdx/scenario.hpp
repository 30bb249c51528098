#pragma once
#include <optional>
#include <string>
#include <vector>

#include "dmdx/calibrate.hpp"
#include "dmdx/double_pass.hpp"
#include "dmdx/hologram.hpp"
#include "dmdx/train.hpp"

namespace dmdx {

// Batch configuration. File format: JSON, see README ("Config file").
struct RunConfig {
    int version = 1;
    std::string scenario = "default";
    OpticalConfig optics;
    double waist = 20e-6;
    int carrier_period = 4;
    std::vector<double> sites;
    std::optional<double> pupil_d_waists;
    std::string train = "single";  // single | double, for optimize

    // characterised map, compensated by every hologram
    double characterized_rms_waves = 0.125;
    // uncompensated residual: fixed rms, or tuned to a baseline at residual_site
    std::optional<double> residual_rms_rad;
    double residual_target_db = -42.6;
    double residual_site = 4;
    double aberration_radius = 3e-3;

    double relay_rms_rad = 0.0;
    unsigned long long relay_seed = 11;
    double stray_floor = 0.0;

    HologramOptions hologram;
    int ifta_iterations = 30;
    OptimizeOptions scans;
    int patch = 3;
    double threshold_db = -50;
    std::vector<double> sweep_d_waists;
    std::vector<unsigned long long> seeds = {1};
    std::string output_dir = "out";

    void validate() const;  // ConfigError with the offending key
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);
std::string dump_config(const RunConfig& cfg);

// One seeded realisation of the configured system.
struct Scenario {
    TrainSetup setup;  // single pass; double pass switches the flag
    DmdPattern primary;
    double residual_rms = 0;
    double baseline_db = 0;  // I_X at residual_site, single pass
};

IftaResult design_for(const RunConfig& rc);
Scenario build_scenario(const RunConfig& rc, unsigned long long seed, const IftaResult& design);

// Residual rms (radians) that puts I_X at `site` on `target_db`, by bisection on [0, hi].
double tune_residual(const TrainSetup& base, const AberrationMap& unit_residual, const DmdPattern& primary,
                     double site, double target_db, double hi = 2.0, int steps = 14);

}  // namespace dmdx
