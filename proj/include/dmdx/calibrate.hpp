#pragma once
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dmdx/hologram.hpp"
#include "dmdx/train.hpp"

namespace dmdx {

struct ScanResult {
    std::vector<double> parameter_values;
    std::vector<double> intensities;  // I_X, linear
    std::vector<bool> excluded;       // recorded but left out of the fit
    std::vector<double> fit_params;   // cosine: c0, c1, phi0; quadratic: q0, q1, q2
    double fit_residual_rms = 0;      // relative to (max - min) of the fitted points
    double optimum = 0;
    bool extrapolated = false;
    bool defined = true;
    std::string diagnostic;
};

struct CosineFit {
    double c0 = 0, c1 = 0, phi0 = 0;
    double residual = 0;  // RMS, absolute
};
CosineFit fit_cosine(const std::vector<double>& phi, const std::vector<double>& y);

struct QuadraticFit {
    double q0 = 0, q1 = 0, q2 = 0;
    double residual = 0;  // RMS, absolute
};
QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y);

// I_X at the probe (intensity ratio to the addressed spot) for one configuration
double probe_ix(const System& sys, const std::vector<SecondaryHologramSpec>& specs, double site);

ScanResult scan_phase(const System& sys, std::vector<SecondaryHologramSpec> specs, size_t index, double probe_site,
                      int n_points, double amplitude);
ScanResult scan_amplitude(const System& sys, std::vector<SecondaryHologramSpec> specs, size_t index,
                          double probe_site, int n_points, double phase, double exclusion = 0.9);

struct GridMap {
    std::vector<double> phases, amplitudes;
    std::vector<double> ix;  // [amplitude][phase], row-major
    size_t min_phase = 0, min_amplitude = 0;
    double at(size_t a, size_t p) const { return ix[a * phases.size() + p]; }
};
GridMap grid_search(const System& sys, std::vector<SecondaryHologramSpec> specs, size_t index, double probe_site,
                    const std::vector<double>& phases, const std::vector<double>& amplitudes);

struct OptimizeOptions {
    int phase_points = 16;
    int amplitude_points = 8;
    double amplitude_max = 0.9;
    bool resweep = true;
    int refine_rounds = 1;  // refinement rounds when resweep is on
    double reference_amplitude = 0.5;
    int max_holograms = 8;
};

struct SitePlan {
    double site = 0;
    int group = 0;
    bool active = true;  // false: hologram dropped, it made the site worse than baseline
    GratingSpec grating;
    double before_db = 0, after_db = 0;
    double seeded_amplitude = 0;
};

struct ScanTrace {
    std::string label;  // e.g. "phase site=4 pass=1"
    ScanResult scan;
};

struct OptimizeResult {
    std::vector<SitePlan> plans;
    std::vector<SecondaryHologramSpec> specs;
    std::vector<ScanTrace> traces;
};

OptimizeResult optimize_sites(const System& sys, const std::vector<double>& sites, const OptimizeOptions& opt = {});

// photodiode surrogate: total power for a given IP1 mirror mask (rows x cols, row-major)
using PowerProbe = std::function<double(const std::vector<std::uint8_t>& mask)>;

struct BeamCenter {
    int row = 0, col = 0;
    int measurements = 0;
};
// coarse block bisection, then single-mirror scans along x then y.
// Bisection follows the brighter half, so any brighter light on the array (the
// zero order, say) must be kept out by the caller's choice of region.
BeamCenter calibrate_beam_center(const PowerProbe& probe, int rows, int cols, double min_power, int fine_half = 8);

// probe that runs the full second pass and sums IP2 power
PowerProbe double_pass_power_probe(const Train& train, const DmdPattern& fp1_pattern);

// text tables for the CLI
std::string scan_table(const std::vector<ScanTrace>& traces);
std::string plan_table(const std::vector<SitePlan>& plans);

}  // namespace dmdx
