#pragma once
// shared fixtures: a small device so unit tests stay fast
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "dmdx/calibrate.hpp"
#include "dmdx/double_pass.hpp"
#include "dmdx/hologram.hpp"
#include "dmdx/metrics.hpp"
#include "dmdx/optics.hpp"
#include "dmdx/train.hpp"

namespace testing_support {

// 256 x 256 FP1, 64 IP1 columns, N = 512, du ~ 11.9 um
inline dmdx::OpticalConfig small_optics() {
    dmdx::OpticalConfig c;
    c.dmd_rows = 512;
    c.dmd_cols = 640;
    c.fp1_cols = 512;
    c.ip1_cols = 128;
    c.illumination_waist = 3e-3;
    return c;
}

inline dmdx::HologramOptions small_hologram() {
    dmdx::HologramOptions h;
    h.window_cols = 60;
    return h;
}

// aberrated single-pass setup on the small device, waist 60 um (about 5 samples)
inline dmdx::TrainSetup small_setup(double residual_rms = 0.6, std::uint64_t seed = 1) {
    using namespace dmdx;
    TrainSetup s;
    s.cfg = small_optics();
    Geometry g = Geometry::from(s.cfg);
    s.target = make_target(s.cfg, 60e-6);
    s.illum = gaussian_illumination(s.cfg, g.rows, g.fp1);
    AberrationRecipe comp{0.5, 1.0e-3, seed + 100, {}};
    s.compensation = synth_aberration(g.rows, g.fp1, g.pitch, comp);
    AberrationRecipe res{residual_rms, 1.0e-3, seed + 200, {}};
    s.aberration = add_maps(s.compensation, synth_aberration(g.rows, g.fp1, g.pitch, res));
    s.hopt = small_hologram();
    s.seed = seed;
    return s;
}

inline dmdx::DmdPattern small_primary(const dmdx::TrainSetup& s) {
    return dmdx::ifta_primary(s.target, s.illum, s.compensation, 20, s.seed, s.cfg, s.hopt);
}

inline double rms_diff(const std::vector<std::complex<double>>& a, const std::vector<std::complex<double>>& b) {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::norm(a[i] - b[i]);
    return std::sqrt(acc / static_cast<double>(a.size()));
}

}  // namespace testing_support
