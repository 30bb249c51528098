#pragma once
#include <optional>
#include <string>
#include <vector>

#include "dmdx/field.hpp"

namespace dmdx {

struct CrosstalkProfile {
    std::vector<double> positions;    // metres from the spot centre along the cut
    std::vector<double> intensities;  // peak normalised, floor applied
    double waist = 0;                 // fitted, metres (0 until fitted)
    double floor_db = -60;
    Plane plane = Plane::Custom;
    int peak_row = 0, peak_col = 0;   // grid index of the located peak
};

// Patch-averaged intensity along a line through the global peak.
// Sample spacing is the field's x pitch; patch is an odd count (3 -> 3x3).
CrosstalkProfile extract_profile(const Field& field, double axis_angle = 0.0, int patch = 3,
                                 double floor_db = -60.0);
// same, but through a given grid point instead of the global peak
CrosstalkProfile extract_profile_at(const Field& field, int row, int col, double axis_angle, int patch,
                                    double floor_db);

// patch mean intensity centred on a grid sample (no normalisation)
double patch_intensity(const Field& field, int row, int col, int patch);

void apply_floor(CrosstalkProfile& p, double floor_db);
double to_db(double ratio);

// dB at a position (metres), linear interpolation in intensity
double relative_crosstalk(const CrosstalkProfile& p, double position);

struct WaistFit {
    double waist = 0;
    double residual = 0;  // RMS relative deviation where the fit is above 1% of its peak
    bool flagged = false;
};
WaistFit fit_waist(const CrosstalkProfile& p);

// Twice the distance of the outermost sample at or above `threshold_db`,
// interpolated to the crossing. nullopt when the cut never drops below it.
std::optional<double> effective_aperture(const CrosstalkProfile& p, double threshold_db = -50.0);

// two-column table: position in waist units, I_X in dB
std::string profile_table(const CrosstalkProfile& p, double waist);

}  // namespace dmdx
