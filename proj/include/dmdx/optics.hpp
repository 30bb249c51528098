#pragma once
#include <optional>
#include <string>
#include <vector>

#include "dmdx/config.hpp"
#include "dmdx/field.hpp"
#include "dmdx/pattern.hpp"

namespace dmdx {

enum class Region { FP1, IP1 };
enum class Direction { Forward, Inverse };

// Phase map co-sampled with the grid it corrects.
struct AberrationMap {
    RealGrid phase;
    std::string description;
};

// Low-order synthetic wavefront: astigmatism (0, 45 deg), coma (x, y), spherical.
// Coefficients are drawn N(0,1) from `seed` unless given; the map is then scaled
// to `rms` radians over the disk of `radius` (piston removed there).
struct AberrationRecipe {
    double rms = 0.0;
    double radius = 3e-3;
    unsigned long long seed = 1;
    std::vector<double> coefficients;  // empty = random; else exactly 5 terms
};

AberrationMap synth_aberration(int rows, int cols, double pitch, const AberrationRecipe& recipe);
AberrationMap zero_aberration(int rows, int cols);
AberrationMap add_maps(const AberrationMap& a, const AberrationMap& b);

// Where the IP1 mirror grid sits in image coordinates: centre of mirror
// (rows/2, ip1_cols/2) is at (x0, y0); mirrors have pitch `pitch`.
struct MirrorAnchor {
    double x0 = 0, y0 = 0, pitch = 0;
};

struct Stop {
    double radius = 0;
    StopShape shape = StopShape::Circle;
};

Field gaussian_illumination(const OpticalConfig& cfg, int rows, int cols);
Field apply_mask(const Field& field, const DmdPattern& pattern, Region region,
                 const MirrorAnchor& anchor = {});
Field apply_phase(const Field& field, const AberrationMap& map);
// Fourier transform by a lens of focal length cfg.focal_length_f (or `focal`).
// Output pitch lambda*f/(N*pitch) per axis, power conserved.
Field lens_fourier(const Field& field, const OpticalConfig& cfg, Direction dir);
Field lens_fourier(const Field& field, double wavelength, double focal, Direction dir);
Field fourier_aperture(const Field& field, double radius, StopShape shape = StopShape::Circle);
// IP1 -> FP2 (stop, aberration) -> IP2 with f_b = relay_magnification * f_a.
Field relay_image(const Field& ip1, const OpticalConfig& cfg, const AberrationMap* aberration,
                  const std::optional<Stop>& stop);

// zero-pad (centred) into an n x n grid, and the reverse
Field embed(const Field& f, int n);
Field crop(const Field& f, int rows, int cols);

// helpers shared by the trains
Plane next_plane(Plane p, Direction dir);

}  // namespace dmdx
