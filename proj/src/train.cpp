#include "dmdx/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dmdx/errors.hpp"
#include "dmdx/fft.hpp"
#include "dmdx/metrics.hpp"
#include "dmdx/rng.hpp"

namespace dmdx {

Stop default_as2(const OpticalConfig& cfg) {
    Geometry g = Geometry::from(cfg);
    return {cfg.as2_orders * g.lf / g.pitch, cfg.as2_shape};
}

Train::Train(TrainSetup s) : s_(std::move(s)), g_(Geometry::from(s_.cfg)) {
    if (s_.illum.rows != g_.rows || s_.illum.cols != g_.fp1) throw ShapeError("illumination is not on the FP1 grid");
    for (const auto* m : {&s_.compensation, &s_.aberration})
        if (m->phase.rows != g_.rows || m->phase.cols != g_.fp1) throw ShapeError("FP1 aberration map shape mismatch");
    if (s_.relay && (s_.relay->phase.rows != g_.n || s_.relay->phase.cols != g_.n))
        throw ShapeError("relay aberration must be on the padded FP2 grid");
    if (s_.patch < 1 || s_.patch % 2 == 0) throw ParameterError("patch must be an odd count");
}

MirrorAnchor Train::anchor() const { return {s_.target.x0_x, s_.target.x0_y, g_.pitch}; }

double Train::waist_at_observation() const {
    return s_.double_pass ? s_.target.waist * s_.cfg.relay_magnification : s_.target.waist;
}

std::pair<int, int> Train::sample_of(double site) const {
    const int n = g_.n;
    int row = n / 2 + static_cast<int>(std::lround(s_.target.x0_y / g_.du));
    int col = n / 2 + static_cast<int>(std::lround(s_.target.x0_x / g_.du)) +
              static_cast<int>(std::lround(site * s_.target.waist / g_.du));
    if (row < 0 || row >= n || col < 0 || col >= n) throw ParameterError("site outside the image field");
    if (s_.double_pass) {
        // two forward transforms invert the image
        row = (n - row) % n;
        col = (n - col) % n;
    }
    return {row, col};
}

Field Train::fp1_field(const DmdPattern& p) const {
    Field f = apply_mask(s_.illum, p, Region::FP1);
    return apply_phase(f, s_.aberration);
}

Field Train::ip1_field(const DmdPattern& p) const {
    return lens_fourier(embed(fp1_field(p), g_.n), s_.cfg, Direction::Forward);
}

Field Train::observe(const DmdPattern& p) const {
    Field ip1 = ip1_field(p);
    if (!s_.double_pass) return ip1;
    const MirrorAnchor a = anchor();
    Field masked = apply_mask(ip1, p, Region::IP1, a);
    if (s_.stray_amplitude > 0) {
        std::mt19937_64 gen(s_.stray_seed);
        const int nr = p.rows, nc = p.ip1_cols();
        for (int r = 0; r < masked.rows; ++r) {
            int mr = static_cast<int>(std::floor((masked.y(r) - a.y0) / a.pitch + 0.5)) + nr / 2;
            for (int c = 0; c < masked.cols; ++c) {
                double ph = 2 * M_PI * uniform01(gen);
                int mc = static_cast<int>(std::floor((masked.x(c) - a.x0) / a.pitch + 0.5)) + nc / 2;
                if (mr >= 0 && mr < nr && mc >= 0 && mc < nc) masked.at(r, c) += std::polar(s_.stray_amplitude, ph);
            }
        }
    }
    return relay_image(masked, s_.cfg, s_.relay ? &*s_.relay : nullptr, s_.as2);
}

namespace {
// exp(-2 pi i m / n) with the integer product reduced first
cd twiddle(long long m, int n) {
    long long k = ((m % n) + n) % n;
    double a = -2.0 * M_PI * static_cast<double>(k) / n;
    return {std::cos(a), std::sin(a)};
}
}  // namespace

std::vector<cd> Train::window_weights(int row, int col, const WindowSpec& w) const {
    if (s_.double_pass) throw ParameterError("double-pass weights need the IP1 pattern; use TrainSystem");
    const int n = g_.n;
    const double s = g_.pitch / g_.du / n;
    std::vector<cd> out(static_cast<size_t>(w.rows) * w.cols);
    const long long kr = row - n / 2, kc = col - n / 2;
    for (int r = 0; r < w.rows; ++r) {
        int R = w.row0 + r;
        long long qr = g_.off_r() + R - n / 2;
        for (int c = 0; c < w.cols; ++c) {
            int C = w.col0 + c;
            long long qc = g_.off_c() + C - n / 2;
            cd e = s_.illum.at(R, C) * std::polar(1.0, s_.aberration.phase.at(R, C));
            out[static_cast<size_t>(r) * w.cols + c] = s * e * twiddle(kr * qr + kc * qc, n);
        }
    }
    return out;
}

// ---------------- TrainSystem

TrainSystem::TrainSystem(std::shared_ptr<const Train> train, DmdPattern primary)
    : train_(std::move(train)), primary_(std::move(primary)) {
    primary_.check_against(train_->geo());
}

GratingSpec TrainSystem::grating_for(double site) const {
    return grating_for_site(train_->setup().target, site, train_->setup().cfg);
}

std::vector<WindowSpec> TrainSystem::windows_for(const std::vector<std::vector<GratingSpec>>& groups) const {
    return allocate_windows(groups, train_->setup().cfg, train_->setup().hopt);
}

DmdPattern TrainSystem::pattern(const std::vector<SecondaryHologramSpec>& specs) const {
    const auto& s = train_->setup();
    return multiplex(primary_, specs, s.illum, s.compensation, s.cfg, s.seed, s.hopt);
}

std::vector<double> TrainSystem::measure_exact(const std::vector<SecondaryHologramSpec>& specs,
                                               const std::vector<double>& sites) const {
    Field f = train_->observe(pattern(specs));
    std::vector<double> out;
    for (double a : sites) {
        auto [r, c] = train_->sample_of(a);
        out.push_back(patch_intensity(f, r, c, train_->setup().patch));
    }
    return out;
}

// Adjoint of the double-pass chain applied to a unit sample at (row, col),
// kept only for the FP1 rows where windows can sit.
const std::vector<cd>& TrainSystem::adjoint_band(int row, int col) const {
    auto key = std::make_pair(row, col);
    auto it = adj_cache_.find(key);
    if (it != adj_cache_.end()) return it->second;
    const Train& t = *train_;
    const auto& s = t.setup();
    const Geometry& g = t.geo();
    const int n = g.n;
    std::vector<cd> v(static_cast<size_t>(n) * n, 0.0);
    v[static_cast<size_t>(row) * n + col] = 1.0;
    const double fa = s.cfg.focal_length_f, fb = s.cfg.relay_magnification * fa;
    const double p_fp2 = s.cfg.wavelength * fa / (n * g.du);
    const double p_ip2 = s.cfg.wavelength * fb / (n * p_fp2);
    // each lens is scale * unitary DFT, so its adjoint is scale * inverse DFT
    centered_dft(v, n, n, +1);
    Field fp2(n, n, p_fp2, p_fp2, Plane::FP2);
    for (size_t i = 0; i < v.size(); ++i) fp2.data[i] = v[i] * (p_fp2 / p_ip2);
    if (s.relay)
        for (size_t i = 0; i < v.size(); ++i) fp2.data[i] *= std::polar(1.0, -s.relay->phase.v[i]);
    if (s.as2) fp2 = fourier_aperture(fp2, s.as2->radius, s.as2->shape);
    v = std::move(fp2.data);
    centered_dft(v, n, n, +1);
    Field ip1(n, n, g.du, g.du, Plane::IP1);
    for (size_t i = 0; i < v.size(); ++i) ip1.data[i] = v[i] * (g.du / p_fp2);
    ip1 = apply_mask(ip1, primary_, Region::IP1, t.anchor());
    v = std::move(ip1.data);
    centered_dft(v, n, n, +1);
    const int band0 = g.rows / 2 - kBand;
    std::vector<cd> band(static_cast<size_t>(2 * kBand) * g.fp1);
    for (int r = 0; r < 2 * kBand; ++r)
        for (int c = 0; c < g.fp1; ++c)
            band[static_cast<size_t>(r) * g.fp1 + c] =
                v[static_cast<size_t>(g.off_r() + band0 + r) * n + (g.off_c() + c)] * (g.pitch / g.du);
    return adj_cache_.emplace(key, std::move(band)).first->second;
}

const std::vector<cd>& TrainSystem::weights(int row, int col, const WindowSpec& w) const {
    auto key = std::make_tuple(row, col, w.rows, w.cols, w.row0, w.col0);
    auto it = w_cache_.find(key);
    if (it != w_cache_.end()) return it->second;
    const Train& t = *train_;
    const auto& s = t.setup();
    const Geometry& g = t.geo();
    std::vector<cd> wts;
    if (!s.double_pass) {
        wts = t.window_weights(row, col, w);
    } else {
        const auto& adj = adjoint_band(row, col);
        const int band0 = g.rows / 2 - kBand;
        if (w.row0 < band0 || w.row0 + w.rows > band0 + 2 * kBand)
            throw ParameterError("window outside the rows kept for double-pass superposition");
        wts.resize(static_cast<size_t>(w.rows) * w.cols);
        for (int r = 0; r < w.rows; ++r)
            for (int c = 0; c < w.cols; ++c) {
                int R = w.row0 + r, C = w.col0 + c;
                cd a = adj[static_cast<size_t>(R - band0) * g.fp1 + C];
                cd e = s.illum.at(R, C) * std::polar(1.0, s.aberration.phase.at(R, C));
                wts[static_cast<size_t>(r) * w.cols + c] = std::conj(a) * e;
            }
    }
    return w_cache_.emplace(key, std::move(wts)).first->second;
}

std::vector<double> TrainSystem::measure(const std::vector<SecondaryHologramSpec>& specs,
                                         const std::vector<double>& sites, bool primary_on) const {
    std::lock_guard<std::mutex> lk(mu_);
    const Train& t = *train_;
    const auto& s = t.setup();
    check_secondaries(specs, t.geo(), s.hopt.max_holograms);
    std::map<int, std::vector<const SecondaryHologramSpec*>> groups;
    for (const auto& sp : specs) groups[sp.group].push_back(&sp);
    std::vector<WindowSpec> key;
    for (const auto& [id, m] : groups) key.push_back(m.front()->window);
    std::sort(key.begin(), key.end(), [](const WindowSpec& a, const WindowSpec& b) {
        return std::tie(a.row0, a.col0, a.rows, a.cols) < std::tie(b.row0, b.col0, b.rows, b.cols);
    });
    if (!primary_on) key.clear();  // FP1 fully dark: the windows make no difference to the base
    if (!base_ || base_key_ != key || base_primary_ != primary_on) {
        DmdPattern p = primary_;
        if (!primary_on) {
            for (int r = 0; r < p.rows; ++r)
                for (int c = 0; c < p.partition; ++c) p.at(r, c) = 0;
        }
        for (const auto& w : key)
            for (int r = 0; r < w.rows; ++r)
                for (int c = 0; c < w.cols; ++c) p.at(w.row0 + r, w.col0 + c) = 0;
        base_ = t.observe(p);
        base_key_ = key;
        base_primary_ = primary_on;
    }
    std::vector<std::pair<const WindowSpec*, BinaryGrid>> content;
    for (const auto& [id, m] : groups)
        content.emplace_back(&m.front()->window, group_window(m, s.illum, s.compensation, s.cfg, s.seed, s.hopt));

    const int n = t.geo().n, h = s.patch / 2;
    std::vector<double> out;
    for (double a : sites) {
        auto [row, col] = t.sample_of(a);
        double acc = 0;
        for (int dr = -h; dr <= h; ++dr)
            for (int dc = -h; dc <= h; ++dc) {
                int r = (row + dr + n) % n, c = (col + dc + n) % n;
                cd f = base_->at(r, c);
                for (const auto& [w, b] : content) {
                    const auto& wt = weights(r, c, *w);
                    for (size_t i = 0; i < wt.size(); ++i)
                        if (b.v[i]) f += wt[i];
                }
                acc += std::norm(f);
            }
        out.push_back(acc / (s.patch * s.patch));
    }
    return out;
}

// ---------------- TwoBeamSystem

TwoBeamSystem::TwoBeamSystem(std::vector<Site> sites, double peak) : sites_(std::move(sites)), peak_(peak) {}

const TwoBeamSystem::Site& TwoBeamSystem::find(double site) const {
    for (const auto& s : sites_)
        if (s.site == site) return s;
    throw ParameterError("two-beam oracle has no such site");
}

GratingSpec TwoBeamSystem::grating_for(double site) const {
    GratingSpec g;
    g.xa_x = site;  // the oracle keys gratings by site
    return g;
}

std::vector<WindowSpec> TwoBeamSystem::windows_for(const std::vector<std::vector<GratingSpec>>& groups) const {
    std::vector<WindowSpec> out;
    for (size_t k = 0; k < groups.size(); ++k) {
        WindowSpec w;
        w.row0 = static_cast<int>(4 * k);
        out.push_back(w);
    }
    return out;
}

std::vector<double> TwoBeamSystem::measure(const std::vector<SecondaryHologramSpec>& specs,
                                           const std::vector<double>& sites, bool primary_on) const {
    std::vector<double> out;
    for (double a : sites) {
        if (a == 0) {
            out.push_back(peak_);
            continue;
        }
        const Site& s = find(a);
        cd f = primary_on ? s.primary : cd(0);
        for (const auto& sp : specs)
            if (sp.grating.xa_x == a) f += s.k * sp.grating.amplitude * std::polar(1.0, sp.grating.phase + s.theta);
        out.push_back(std::norm(f));
    }
    return out;
}

double TwoBeamSystem::optimum_phase(double site) const {
    const Site& s = find(site);
    return wrap_phase(std::arg(s.primary) + M_PI - s.theta);
}

double TwoBeamSystem::optimum_amplitude(double site) const {
    const Site& s = find(site);
    return std::abs(s.primary) / s.k;
}

}  // namespace dmdx
