#pragma once
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "dmdx/config.hpp"
#include "dmdx/field.hpp"
#include "dmdx/optics.hpp"
#include "dmdx/pattern.hpp"

namespace dmdx {

// Grating of one secondary hologram. xa is the image-plane point (metres) the
// first order lands on; the FP1 phase is 2 pi xa.x / (lambda f) + phase.
struct GratingSpec {
    double xa_x = 0, xa_y = 0;
    double amplitude = 0.5;
    double phase = 0.0;
};

// Window in FP1 simulation pixels; (row0, col0) is the corner.
struct WindowSpec {
    int rows = 2, cols = 230;
    int row0 = 0, col0 = 0;
    bool operator==(const WindowSpec&) const = default;
    bool overlaps(const WindowSpec& o) const;
};

struct SecondaryHologramSpec {
    GratingSpec grating;
    WindowSpec window;
    double site = 0;  // target displacement from X0, waist units along x
    int group = 0;
};

struct AddressingTarget {
    double x0_x = 0, x0_y = 0;  // image-plane spot centre, metres
    double waist = 20e-6;
};

enum class Quantizer { ErrorDiffusion, Random };

struct HologramOptions {
    double amplitude_floor = 0.05;  // |E_in| clamp, fraction of the window maximum
    double taper = 0.0;             // raised-cosine edge fraction along x, 0 = hard window
    bool lock_thresholds = true;    // binarization noise follows the lead grating's lateral shift
    Quantizer primary_quantizer = Quantizer::ErrorDiffusion;
    int window_rows = 2;
    int window_cols = 230;
    int guard_rows = 2;
    int window_row_offset = 0;  // first window's row relative to the FP1 centre
    int max_holograms = 8;
};

struct BinaryGrid {
    int rows = 0, cols = 0;
    std::vector<std::uint8_t> v;
    std::uint8_t at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

// ---- primary

struct IftaResult {
    std::vector<std::complex<double>> baseband;  // FP1 grid, |h| <= 1
    int iterations_run = 0;
    double final_error = 0;  // relative amplitude error over the signal window
};

// Baseband design: Gaussian spot of the requested waist, refined by GS alternation
// between the image-plane signal window and the FP1 support with |h| <= 1.
// Independent of the aberration, so it can be shared across aberration draws.
IftaResult ifta_baseband(const AddressingTarget& target, const Field& illum, const OpticalConfig& cfg, int iterations);

// Continuous primary: |h| (cos(carrier + arg h - phi_in) + 1) / 2.
RealGrid primary_continuous(const IftaResult& design, const AddressingTarget& target, const Field& illum,
                            const AberrationMap& compensation, const OpticalConfig& cfg);

// Carrier-tuned error diffusion along y (lag 2): noise null at the period-4 carrier.
BinaryGrid error_diffuse_lag2(const RealGrid& cont);

DmdPattern ifta_primary(const AddressingTarget& target, const Field& illum, const AberrationMap& compensation,
                        int iterations, std::uint64_t rng_seed, const OpticalConfig& cfg,
                        const HologramOptions& opt = {}, IftaResult* design_out = nullptr);
// quantise an existing design (skips the IFTA loop)
DmdPattern primary_from_design(const IftaResult& design, const AddressingTarget& target, const Field& illum,
                               const AberrationMap& compensation, std::uint64_t rng_seed, const OpticalConfig& cfg,
                               const HologramOptions& opt = {});

// ---- secondaries

RealGrid secondary_continuous(const SecondaryHologramSpec& spec, const Field& illum, const AberrationMap& compensation,
                              const OpticalConfig& cfg, const HologramOptions& opt = {},
                              std::vector<std::string>* warnings = nullptr);

BinaryGrid random_binarize(const RealGrid& cont, std::uint64_t seed);
// same thresholds as random_binarize, read at column (c + shift) mod cols
BinaryGrid random_binarize_shifted(const RealGrid& cont, std::uint64_t seed, long shift);

// rule checks: <= 2 per group, shared window inside a group, disjoint groups, inside FP1
void check_secondaries(const std::vector<SecondaryHologramSpec>& specs, const Geometry& g, int max_holograms = 8);

// Window content for one overlay group (sum, clamp, binarize).
BinaryGrid group_window(const std::vector<const SecondaryHologramSpec*>& members, const Field& illum,
                        const AberrationMap& compensation, const OpticalConfig& cfg, std::uint64_t seed,
                        const HologramOptions& opt);

DmdPattern multiplex(const DmdPattern& primary, const std::vector<SecondaryHologramSpec>& specs, const Field& illum,
                     const AberrationMap& compensation, const OpticalConfig& cfg, std::uint64_t rng_seed,
                     const HologramOptions& opt = {});

GratingSpec shift_grating(const GratingSpec& spec, double delta_phase);
double wrap_phase(double phi);  // into [0, 2 pi)

// grating period along x in FP1 pixels (signed); infinite for xa_x == 0
double grating_period_px(const GratingSpec& g, const OpticalConfig& cfg);
// lateral content shift (pixels) that realises the grating's phase
long lock_shift(const GratingSpec& g, const OpticalConfig& cfg);

// Windows for `n_groups` overlay groups, stacked along y about the FP1 centre row
// with a guard band. Width snapped to whole grating periods for each group's gratings.
std::vector<WindowSpec> allocate_windows(const std::vector<std::vector<GratingSpec>>& groups, const OpticalConfig& cfg,
                                         const HologramOptions& opt);

// spot centre on the carrier: x0 = 0, y0 = lambda f / (period * pitch)
AddressingTarget make_target(const OpticalConfig& cfg, double waist, int carrier_period = 4);

// image-plane point for a site a (waist units) next to the target
GratingSpec grating_for_site(const AddressingTarget& target, double site, const OpticalConfig& cfg,
                             double amplitude = 0.5, double phase = 0.0);

}  // namespace dmdx
