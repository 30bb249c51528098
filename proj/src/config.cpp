#include "dmdx/config.hpp"

#include <cmath>
#include <string>

#include "dmdx/errors.hpp"

namespace dmdx {

void OpticalConfig::validate() const {
    auto pos = [](double v, const char* name) {
        if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string("optics.") + name + " must be positive");
    };
    pos(wavelength, "wavelength");
    pos(focal_length_f, "focal_length");
    pos(dmd_pitch, "dmd_pitch");
    pos(illumination_waist, "illumination_waist");
    pos(relay_magnification, "relay_magnification");
    pos(padding, "padding");
    pos(as2_orders, "as2_orders");
    if (dmd_rows <= 0 || dmd_cols <= 0 || fp1_cols <= 0 || ip1_cols <= 0)
        throw ConfigError("optics: DMD dimensions must be positive");
    if (fp1_cols + ip1_cols != dmd_cols) throw ConfigError("optics: fp1_cols + ip1_cols must equal dmd_cols");
    if (superpixel < 1) throw ConfigError("optics.superpixel must be >= 1");
    if (dmd_rows % superpixel || dmd_cols % superpixel || fp1_cols % superpixel)
        throw ConfigError("optics.superpixel must divide the DMD rows, columns and the FP1 split");
    if (!std::isfinite(detector_floor_db) || detector_floor_db >= 0)
        throw ConfigError("optics.detector_floor_db must be negative");
}

Geometry Geometry::from(const OpticalConfig& cfg) {
    cfg.validate();
    Geometry g;
    g.rows = cfg.dmd_rows / cfg.superpixel;
    g.fp1 = cfg.fp1_cols / cfg.superpixel;
    g.ip1 = cfg.ip1_cols / cfg.superpixel;
    g.pitch = cfg.dmd_pitch * cfg.superpixel;
    g.lf = cfg.wavelength * cfg.focal_length_f;
    int side = g.rows > g.fp1 ? g.rows : g.fp1;
    // nearest power of two in log scale, never smaller than the grid itself
    double want = cfg.padding * side;
    int e = static_cast<int>(std::lround(std::log2(want)));
    int n = 1 << e;
    while (n < side) n <<= 1;
    g.n = n;
    g.du = g.lf / (g.n * g.pitch);
    return g;
}

}  // namespace dmdx
