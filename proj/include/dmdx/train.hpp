#pragma once
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "dmdx/hologram.hpp"
#include "dmdx/optics.hpp"

namespace dmdx {

// Everything the FP1 -> observation-plane path needs.
struct TrainSetup {
    OpticalConfig cfg;
    AddressingTarget target;
    Field illum;
    AberrationMap compensation;  // what the holograms correct for
    AberrationMap aberration;    // what the light actually sees at FP1
    HologramOptions hopt;
    std::uint64_t seed = 1;      // binarization
    int patch = 3;

    bool double_pass = false;
    std::optional<Stop> as2;              // relay stop (double pass)
    std::optional<AberrationMap> relay;   // relay pupil phase, FP2 grid
    double stray_amplitude = 0;           // additive IP1 stray field, absolute amplitude
    std::uint64_t stray_seed = 7;
};

// Default AS2 stop for a config: radius as2_orders * lambda f / mirror pitch.
Stop default_as2(const OpticalConfig& cfg);

// Pure optical path. Observation plane is IP1 (single pass) or IP2 (double pass).
class Train {
public:
    explicit Train(TrainSetup s);
    const TrainSetup& setup() const { return s_; }
    const Geometry& geo() const { return g_; }

    Field fp1_field(const DmdPattern& p) const;
    Field ip1_field(const DmdPattern& p) const;  // before the IP1 mask
    Field observe(const DmdPattern& p) const;
    // image sample of a site (waist units along x from the target)
    std::pair<int, int> sample_of(double site) const;
    double waist_at_observation() const;
    MirrorAnchor anchor() const;

    // single pass: weights w such that the observed field at (row, col) gains
    // sum w * b over the window pixels b (ON = 1); row-major over the window
    std::vector<cd> window_weights(int row, int col, const WindowSpec& w) const;

private:
    TrainSetup s_;
    Geometry g_;
};

// The measurement closure driven by the scans and the optimizer.
class System {
public:
    virtual ~System() = default;
    // patch-mean intensities at `sites` (waist units, 0 = addressed spot) for the
    // primary multiplexed with `specs`; primary_on = false leaves only the windows lit
    virtual std::vector<double> measure(const std::vector<SecondaryHologramSpec>& specs,
                                        const std::vector<double>& sites, bool primary_on = true) const = 0;
    virtual GratingSpec grating_for(double site) const = 0;
    virtual std::vector<WindowSpec> windows_for(const std::vector<std::vector<GratingSpec>>& groups) const = 0;
};

// System on a simulated train. Window contributions are superposed on a cached
// base field, which matches full propagation to rounding (see tests).
class TrainSystem : public System {
public:
    TrainSystem(std::shared_ptr<const Train> train, DmdPattern primary);
    std::vector<double> measure(const std::vector<SecondaryHologramSpec>& specs, const std::vector<double>& sites,
                                bool primary_on = true) const override;
    GratingSpec grating_for(double site) const override;
    std::vector<WindowSpec> windows_for(const std::vector<std::vector<GratingSpec>>& groups) const override;

    // full propagation of the multiplexed pattern, for checks and final numbers
    std::vector<double> measure_exact(const std::vector<SecondaryHologramSpec>& specs,
                                      const std::vector<double>& sites) const;
    DmdPattern pattern(const std::vector<SecondaryHologramSpec>& specs) const;
    const Train& train() const { return *train_; }
    const DmdPattern& primary() const { return primary_; }

private:
    std::shared_ptr<const Train> train_;
    DmdPattern primary_;
    mutable std::mutex mu_;
    mutable std::vector<WindowSpec> base_key_;
    mutable bool base_primary_ = true;
    mutable std::optional<Field> base_;
    mutable std::map<std::tuple<int, int, int, int, int, int>, std::vector<cd>> w_cache_;
    mutable std::map<std::pair<int, int>, std::vector<cd>> adj_cache_;
    static constexpr int kBand = 48;  // FP1 rows either side of centre kept for double-pass weights
    const std::vector<cd>& weights(int row, int col, const WindowSpec& w) const;
    const std::vector<cd>& adjoint_band(int row, int col) const;
};

// Closed-form two-beam oracle: field at a site = E_p + k A exp(i(phi + theta)).
// Used to check the scan fits and the optimizer against known optima.
class TwoBeamSystem : public System {
public:
    struct Site {
        double site;
        cd primary;  // primary-beam field at the site
        double k;    // auxiliary field per unit A_s
        double theta;
    };
    TwoBeamSystem(std::vector<Site> sites, double peak = 1.0);
    std::vector<double> measure(const std::vector<SecondaryHologramSpec>& specs, const std::vector<double>& sites,
                                bool primary_on = true) const override;
    GratingSpec grating_for(double site) const override;
    std::vector<WindowSpec> windows_for(const std::vector<std::vector<GratingSpec>>& groups) const override;
    double optimum_phase(double site) const;
    double optimum_amplitude(double site) const;

private:
    std::vector<Site> sites_;
    double peak_;
    const Site& find(double site) const;
};

}  // namespace dmdx
