#include "dmdx/hologram.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "dmdx/errors.hpp"
#include "dmdx/rng.hpp"

namespace dmdx {

bool WindowSpec::overlaps(const WindowSpec& o) const {
    return row0 < o.row0 + o.rows && o.row0 < row0 + rows && col0 < o.col0 + o.cols && o.col0 < col0 + cols;
}

double wrap_phase(double phi) {
    double r = std::fmod(phi, 2 * M_PI);
    if (r < 0) r += 2 * M_PI;
    if (r >= 2 * M_PI) r = 0;
    return r;
}

GratingSpec shift_grating(const GratingSpec& spec, double delta) {
    GratingSpec out = spec;
    // reduce delta first: fmod is exact, so whole turns leave the phase bit-identical
    out.phase = wrap_phase(wrap_phase(spec.phase) + wrap_phase(delta));
    return out;
}

double grating_period_px(const GratingSpec& g, const OpticalConfig& cfg) {
    Geometry geo = Geometry::from(cfg);
    if (g.xa_x == 0) return INFINITY;
    return geo.lf / (g.xa_x * geo.pitch);
}

long lock_shift(const GratingSpec& g, const OpticalConfig& cfg) {
    double per = grating_period_px(g, cfg);
    if (!std::isfinite(per)) return 0;
    return std::lround(wrap_phase(g.phase) / (2 * M_PI) * per);
}

GratingSpec grating_for_site(const AddressingTarget& t, double site, const OpticalConfig& cfg, double amp,
                             double phase) {
    Geometry g = Geometry::from(cfg);
    GratingSpec s;
    // snapped to the image sample grid so the probe sits on the grating's centre
    s.xa_x = t.x0_x + std::round(site * t.waist / g.du) * g.du;
    s.xa_y = t.x0_y;
    s.amplitude = amp;
    s.phase = wrap_phase(phase);
    return s;
}

AddressingTarget make_target(const OpticalConfig& cfg, double waist, int period) {
    if (period < 2) throw ParameterError("carrier period must be at least 2 pixels");
    Geometry g = Geometry::from(cfg);
    AddressingTarget t;
    t.x0_x = 0;
    t.x0_y = g.lf / (period * g.pitch);
    t.waist = waist;
    return t;
}

// ---------------- primary

IftaResult ifta_baseband(const AddressingTarget& target, const Field& illum, const OpticalConfig& cfg, int iterations) {
    if (iterations < 1) throw ParameterError("IFTA needs at least one iteration");
    Geometry g = Geometry::from(cfg);
    if (illum.rows != g.rows || illum.cols != g.fp1) throw ShapeError("illumination is not on the FP1 grid");
    double half_fov = 0.5 * g.n * g.du;
    if (std::abs(target.x0_x) >= half_fov || std::abs(target.x0_y) >= half_fov)
        throw ParameterError("target outside the image field of view");
    if (!(target.waist > 0)) throw ParameterError("target waist must be positive");

    const double W = g.lf / (M_PI * target.waist);  // FP1 Gaussian that focuses to the requested waist
    IftaResult res;
    res.baseband.assign(static_cast<size_t>(g.rows) * g.fp1, 0.0);
    double mx = 0;
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.fp1; ++c) {
            double x = g.fp1_x(c), y = g.fp1_y(r);
            double v = std::exp(-(x * x + y * y) / (W * W)) / std::abs(illum.at(r, c));
            res.baseband[static_cast<size_t>(r) * g.fp1 + c] = v;
            mx = std::max(mx, v);
        }
    for (auto& z : res.baseband) z /= mx;

    // signal window at the image plane: a strip along the addressing axis
    const double sx = 40 * target.waist, sy = 3 * target.waist;
    double prev = INFINITY;
    for (int it = 0; it < iterations; ++it) {
        Field f(g.rows, g.fp1, g.pitch, g.pitch, Plane::FP1);
        for (size_t i = 0; i < f.data.size(); ++i) f.data[i] = illum.data[i] * res.baseband[i];
        Field img = lens_fourier(embed(f, g.n), cfg, Direction::Forward);
        double num = 0, den = 0;
        std::vector<size_t> idx;
        std::vector<double> tgt;
        for (int r = 0; r < g.n; ++r) {
            double y = img.y(r);
            if (std::abs(y) > sy) continue;
            for (int c = 0; c < g.n; ++c) {
                double x = img.x(c);
                if (std::abs(x) > sx) continue;
                double t = std::exp(-(x * x + y * y) / (target.waist * target.waist));
                size_t i = static_cast<size_t>(r) * g.n + c;
                idx.push_back(i);
                tgt.push_back(t);
                num += std::abs(img.data[i]) * t;
                den += t * t;
            }
        }
        double a = num / den, err = 0, norm = 0;
        for (size_t k = 0; k < idx.size(); ++k) {
            double d = std::abs(img.data[idx[k]]) - a * tgt[k];
            err += d * d;
            norm += a * a * tgt[k] * tgt[k];
            img.data[idx[k]] = std::polar(a * tgt[k], std::arg(img.data[idx[k]]));
        }
        err = std::sqrt(err / norm);
        res.iterations_run = it + 1;
        res.final_error = err;
        if (err < 1e-4 || std::abs(prev - err) < 1e-4 * err) break;
        prev = err;
        Field back = crop(lens_fourier(img, cfg, Direction::Inverse), g.rows, g.fp1);
        mx = 0;
        for (size_t i = 0; i < back.data.size(); ++i) {
            res.baseband[i] = back.data[i] / std::abs(illum.data[i]);
            mx = std::max(mx, std::abs(res.baseband[i]));
        }
        // transmission cannot exceed 1
        for (auto& z : res.baseband) z /= mx;
    }
    return res;
}

RealGrid primary_continuous(const IftaResult& d, const AddressingTarget& t, const Field& illum,
                            const AberrationMap& comp, const OpticalConfig& cfg) {
    Geometry g = Geometry::from(cfg);
    if (comp.phase.rows != g.rows || comp.phase.cols != g.fp1) throw ShapeError("compensation map not on FP1 grid");
    if (illum.rows != g.rows || illum.cols != g.fp1) throw ShapeError("illumination is not on the FP1 grid");
    RealGrid F(g.rows, g.fp1);
    const double kx = 2 * M_PI * t.x0_x / g.lf, ky = 2 * M_PI * t.x0_y / g.lf;
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.fp1; ++c) {
            const auto& h = d.baseband[static_cast<size_t>(r) * g.fp1 + c];
            double th = kx * g.fp1_x(c) + ky * g.fp1_y(r) + std::arg(h) - comp.phase.at(r, c);
            F.at(r, c) = std::clamp(std::abs(h) * (std::cos(th) + 1) / 2, 0.0, 1.0);
        }
    return F;
}

BinaryGrid error_diffuse_lag2(const RealGrid& F) {
    BinaryGrid B{F.rows, F.cols, std::vector<std::uint8_t>(F.v.size())};
    std::vector<double> e(F.v.size(), 0.0);
    // error is subtracted two rows later: noise transfer (1 + z^-2), zero at the period-4 carrier
    for (int r = 0; r < F.rows; ++r)
        for (int c = 0; c < F.cols; ++c) {
            size_t i = static_cast<size_t>(r) * F.cols + c;
            double v = F.v[i] - (r >= 2 ? e[i - 2 * static_cast<size_t>(F.cols)] : 0.0);
            std::uint8_t b = v > 0.5;
            B.v[i] = b;
            e[i] = v - b;
        }
    return B;
}

namespace {
DmdPattern place_fp1(const BinaryGrid& b, const Geometry& g) {
    DmdPattern p = DmdPattern::blank(g, 0, 1);
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.fp1; ++c) p.at(r, c) = b.at(r, c);
    return p;
}
}  // namespace

DmdPattern primary_from_design(const IftaResult& d, const AddressingTarget& t, const Field& illum,
                               const AberrationMap& comp, std::uint64_t seed, const OpticalConfig& cfg,
                               const HologramOptions& opt) {
    Geometry g = Geometry::from(cfg);
    RealGrid F = primary_continuous(d, t, illum, comp, cfg);
    BinaryGrid b = opt.primary_quantizer == Quantizer::ErrorDiffusion ? error_diffuse_lag2(F)
                                                                       : random_binarize(F, mix_seed(seed, 0xF1));
    return place_fp1(b, g);
}

DmdPattern ifta_primary(const AddressingTarget& t, const Field& illum, const AberrationMap& comp, int iterations,
                        std::uint64_t seed, const OpticalConfig& cfg, const HologramOptions& opt, IftaResult* out) {
    IftaResult d = ifta_baseband(t, illum, cfg, iterations);
    DmdPattern p = primary_from_design(d, t, illum, comp, seed, cfg, opt);
    if (out) *out = std::move(d);
    return p;
}

// ---------------- secondaries

RealGrid secondary_continuous(const SecondaryHologramSpec& s, const Field& illum, const AberrationMap& comp,
                              const OpticalConfig& cfg, const HologramOptions& opt, std::vector<std::string>* warnings) {
    Geometry g = Geometry::from(cfg);
    const WindowSpec& w = s.window;
    if (w.rows < 1 || w.cols < 1 || w.row0 < 0 || w.col0 < 0 || w.row0 + w.rows > g.rows || w.col0 + w.cols > g.fp1)
        throw ParameterError("secondary window outside FP1");
    if (s.grating.amplitude < 0 || s.grating.amplitude > 1) throw ParameterError("A_s must lie in [0, 1]");
    double emax = 0;
    for (int r = 0; r < w.rows; ++r)
        for (int c = 0; c < w.cols; ++c) emax = std::max(emax, std::abs(illum.at(w.row0 + r, w.col0 + c)));
    if (!(emax > 0)) throw ParameterError("no illumination inside the window");
    const double floor = opt.amplitude_floor * emax;
    double emin = INFINITY;
    int clamped = 0;
    for (int r = 0; r < w.rows; ++r)
        for (int c = 0; c < w.cols; ++c) {
            double e = std::abs(illum.at(w.row0 + r, w.col0 + c));
            if (e < floor) ++clamped;
            emin = std::min(emin, std::max(e, floor));
        }
    if (warnings && clamped > w.rows * w.cols / 10)
        warnings->push_back("illumination below the amplitude floor on more than 10% of a window");
    // eta: largest factor keeping the A_s = 1 map inside [0, 1]
    const double eta = emin;
    const double kx = 2 * M_PI * s.grating.xa_x / g.lf, ky = 2 * M_PI * s.grating.xa_y / g.lf;
    const double ph = wrap_phase(s.grating.phase);
    RealGrid F(w.rows, w.cols);
    for (int r = 0; r < w.rows; ++r)
        for (int c = 0; c < w.cols; ++c) {
            int R = w.row0 + r, C = w.col0 + c;
            double e = std::max(std::abs(illum.at(R, C)), floor);
            double th = kx * g.fp1_x(C) + ky * g.fp1_y(R) + ph - comp.phase.at(R, C);
            double v = eta / e * s.grating.amplitude / 2 * (std::cos(th) + 1);
            if (opt.taper > 0) {
                double edge = opt.taper * w.cols;
                double d = std::min(c + 0.5, w.cols - c - 0.5);
                if (d < edge) v *= 0.5 * (1 - std::cos(M_PI * d / edge));
            }
            F.at(r, c) = std::clamp(v, 0.0, 1.0);
        }
    return F;
}

BinaryGrid random_binarize_shifted(const RealGrid& cont, std::uint64_t seed, long shift) {
    for (double v : cont.v)
        if (!(v >= 0 && v <= 1)) throw ParameterError("binarization input outside [0, 1]");
    std::mt19937_64 gen(seed);
    std::vector<double> u(cont.v.size());
    for (auto& x : u) x = uniform01(gen);
    BinaryGrid b{cont.rows, cont.cols, std::vector<std::uint8_t>(cont.v.size())};
    const long L = cont.cols;
    const long s = ((shift % L) + L) % L;
    for (int r = 0; r < cont.rows; ++r)
        for (int c = 0; c < cont.cols; ++c) {
            size_t i = static_cast<size_t>(r) * cont.cols + c;
            double th = u[static_cast<size_t>(r) * cont.cols + static_cast<size_t>((c + s) % L)];
            b.v[i] = th < cont.v[i];
        }
    return b;
}

BinaryGrid random_binarize(const RealGrid& cont, std::uint64_t seed) { return random_binarize_shifted(cont, seed, 0); }

void check_secondaries(const std::vector<SecondaryHologramSpec>& specs, const Geometry& g, int max_holograms) {
    if (static_cast<int>(specs.size()) > max_holograms)
        throw CapacityError("more than " + std::to_string(max_holograms) + " secondary holograms requested");
    std::map<int, std::vector<const SecondaryHologramSpec*>> groups;
    for (const auto& s : specs) {
        const WindowSpec& w = s.window;
        if (w.rows < 1 || w.cols < 1 || w.row0 < 0 || w.col0 < 0 || w.row0 + w.rows > g.rows ||
            w.col0 + w.cols > g.fp1)
            throw RuleViolation("secondary window lies outside FP1");
        groups[s.group].push_back(&s);
    }
    for (const auto& [id, m] : groups) {
        if (m.size() > 2)
            throw RuleViolation("overlay group " + std::to_string(id) + " holds more than two secondary holograms");
        if (m.size() == 2 && !(m[0]->window == m[1]->window))
            throw RuleViolation("overlaid holograms of group " + std::to_string(id) + " must share one window");
    }
    for (auto a = groups.begin(); a != groups.end(); ++a)
        for (auto b = std::next(a); b != groups.end(); ++b)
            if (a->second[0]->window.overlaps(b->second[0]->window))
                throw RuleViolation("windows of overlay groups " + std::to_string(a->first) + " and " +
                                    std::to_string(b->first) + " overlap");
}

BinaryGrid group_window(const std::vector<const SecondaryHologramSpec*>& members, const Field& illum,
                        const AberrationMap& comp, const OpticalConfig& cfg, std::uint64_t seed,
                        const HologramOptions& opt) {
    const WindowSpec& w = members.front()->window;
    RealGrid sum(w.rows, w.cols, 0.0);
    for (const auto* s : members) {
        RealGrid F = secondary_continuous(*s, illum, comp, cfg, opt);
        for (size_t i = 0; i < sum.v.size(); ++i) sum.v[i] += F.v[i];
    }
    for (auto& v : sum.v) v = std::clamp(v, 0.0, 1.0);
    long shift = opt.lock_thresholds ? lock_shift(members.front()->grating, cfg) : 0;
    return random_binarize_shifted(sum, mix_seed(seed, static_cast<std::uint64_t>(members.front()->group) + 17), shift);
}

DmdPattern multiplex(const DmdPattern& primary, const std::vector<SecondaryHologramSpec>& specs, const Field& illum,
                     const AberrationMap& comp, const OpticalConfig& cfg, std::uint64_t seed,
                     const HologramOptions& opt) {
    Geometry g = Geometry::from(cfg);
    primary.check_against(g);
    check_secondaries(specs, g, opt.max_holograms);
    std::map<int, std::vector<const SecondaryHologramSpec*>> groups;
    for (const auto& s : specs) groups[s.group].push_back(&s);
    DmdPattern out = primary;
    for (const auto& [id, m] : groups) {
        BinaryGrid b = group_window(m, illum, comp, cfg, seed, opt);
        const WindowSpec& w = m.front()->window;
        for (int r = 0; r < w.rows; ++r)
            for (int c = 0; c < w.cols; ++c) out.at(w.row0 + r, w.col0 + c) = b.at(r, c);
    }
    return out;
}

std::vector<WindowSpec> allocate_windows(const std::vector<std::vector<GratingSpec>>& groups, const OpticalConfig& cfg,
                                         const HologramOptions& opt) {
    Geometry g = Geometry::from(cfg);
    std::vector<WindowSpec> out;
    const int m = opt.window_rows, step = opt.window_rows + opt.guard_rows;
    if (m < 1 || opt.window_cols < 1) throw ParameterError("window must be at least 1x1");
    const int base = g.rows / 2 - m / 2 + opt.window_row_offset;
    for (size_t k = 0; k < groups.size(); ++k) {
        // centre, then alternately below and above
        int j = static_cast<int>((k + 1) / 2);
        int row0 = base + (k % 2 ? j : -j) * step;
        if (row0 < 0 || row0 + m > g.rows)
            throw CapacityError("FP1 has no room for window " + std::to_string(k + 1));
        // width: whole number of periods for every grating of the group, if one is near
        int best = opt.window_cols;
        double best_err = INFINITY;
        int lo = std::max(1, static_cast<int>(std::floor(opt.window_cols * 0.8)));
        int hi = std::min(g.fp1, static_cast<int>(std::ceil(opt.window_cols * 1.2)));
        for (int L = lo; L <= hi; ++L) {
            double e = 0;
            for (const auto& gr : groups[k]) {
                double per = std::abs(grating_period_px(gr, cfg));
                if (!std::isfinite(per)) continue;
                double cyc = L / per;
                e = std::max(e, std::abs(cyc - std::round(cyc)));
            }
            double score = e + 1e-6 * std::abs(L - opt.window_cols);
            if (score < best_err) {
                best_err = score;
                best = L;
            }
        }
        if (best > g.fp1) throw CapacityError("window wider than FP1");
        WindowSpec w;
        w.rows = m;
        w.cols = best;
        w.row0 = row0;
        w.col0 = g.fp1 / 2 - best / 2;
        out.push_back(w);
    }
    return out;
}

}  // namespace dmdx
