#pragma once
#include <cstddef>

namespace dmdx {

enum class StopShape { Circle, Square };

// All lengths in metres.
struct OpticalConfig {
    double wavelength = 370e-9;
    double focal_length_f = 0.25;
    double dmd_pitch = 7.6e-6;
    int dmd_rows = 1600;
    int dmd_cols = 2560;
    int fp1_cols = 2060;
    int ip1_cols = 500;
    double illumination_waist = 10e-3;
    double relay_magnification = 0.6;
    int superpixel = 2;
    double detector_floor_db = -60.0;
    // padded FFT size is the power of two nearest to padding * longer FP1 side
    double padding = 2.0;
    // AS2 radius in units of the first IP1 mirror-grid order
    double as2_orders = 0.55;
    StopShape as2_shape = StopShape::Circle;

    // throws ConfigError
    void validate() const;
};

// Sampling derived from an OpticalConfig.
struct Geometry {
    int rows = 0;      // FP1 / IP1 rows in simulation pixels
    int fp1 = 0;       // FP1 columns
    int ip1 = 0;       // IP1 columns
    int n = 0;         // padded FFT size (square)
    double pitch = 0;  // simulation pixel pitch at the DMD
    double du = 0;     // image-plane sample pitch after one lens transform
    double lf = 0;     // wavelength * focal length

    static Geometry from(const OpticalConfig& cfg);

    // FP1 physical coordinate of a pixel centre; the grid centre is the optical axis
    double fp1_x(int col) const { return (col - fp1 / 2) * pitch; }
    double fp1_y(int row) const { return (row - rows / 2) * pitch; }
    // embedded index of FP1 pixel (0,0) in the padded grid
    int off_r() const { return n / 2 - rows / 2; }
    int off_c() const { return n / 2 - fp1 / 2; }
};

}  // namespace dmdx
