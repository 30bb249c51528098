#pragma once
#include <optional>
#include <vector>

#include "dmdx/calibrate.hpp"
#include "dmdx/metrics.hpp"
#include "dmdx/train.hpp"

namespace dmdx {

// Square reflective pupil on IP1, centred on a mirror.
struct PupilSpec {
    int center_row = 0, center_col = 0;  // IP1 mirror coordinates
    double d = 0;                        // side length, metres
    StopShape shape = StopShape::Square;
};

struct DoublePassResult {
    Field field_ip2;
    CrosstalkProfile profile;
    double waist_ip2 = 0;                     // nominal w' = m w
    std::optional<double> effective_aperture; // metres; nullopt = threshold never crossed
};

// mirror count across a pupil of side d: odd (centred on a mirror) and >= d / pitch
int pupil_mirrors(double d, double mirror_pitch);
// IP1 region of `pattern` replaced by the pupil (absent = all ON)
DmdPattern with_pupil(const DmdPattern& pattern, const std::optional<PupilSpec>& pupil, double mirror_pitch);
PupilSpec centred_pupil(const Geometry& g, double d);

// `setup` supplies optics, illumination, FP1 and relay aberrations and AS2;
// its double_pass flag and stray amplitude are set here.
DoublePassResult simulate_double_pass(const TrainSetup& setup, const DmdPattern& fp1_pattern,
                                      const std::optional<PupilSpec>& pupil, double stray_floor = 0,
                                      double threshold_db = -50);

struct SweepPoint {
    double d = 0;
    std::optional<double> d_prime;
};
std::vector<SweepPoint> aperture_sweep(const TrainSetup& setup, const DmdPattern& fp1_pattern,
                                       const std::vector<double>& d_values, double stray_floor = 0,
                                       int threads = 1, double threshold_db = -50);

struct CombinedResult {
    DoublePassResult result;
    OptimizeResult optimized;
    DmdPattern pattern;
};
// optimize the sites against the double pass with the pupil in place, then simulate
CombinedResult combined_pipeline(const TrainSetup& setup, const DmdPattern& primary, const std::vector<double>& sites,
                                 std::optional<double> pupil_d, const OptimizeOptions& opt = {},
                                 double stray_floor = 0);

}  // namespace dmdx
