#include "dmdx/calibrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "dmdx/errors.hpp"

namespace dmdx {

namespace {

// least squares with 3 basis functions through the normal equations
std::array<double, 3> lsq3(const std::vector<std::array<double, 3>>& X, const std::vector<double>& y) {
    double A[3][4] = {};
    for (size_t i = 0; i < y.size(); ++i)
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) A[r][c] += X[i][r] * X[i][c];
            A[r][3] += X[i][r] * y[i];
        }
    for (int k = 0; k < 3; ++k) {
        int piv = k;
        for (int r = k + 1; r < 3; ++r)
            if (std::abs(A[r][k]) > std::abs(A[piv][k])) piv = r;
        for (int c = 0; c < 4; ++c) std::swap(A[k][c], A[piv][c]);
        if (A[k][k] == 0) throw ParameterError("singular least-squares system");
        for (int r = 0; r < 3; ++r) {
            if (r == k) continue;
            double f = A[r][k] / A[k][k];
            for (int c = k; c < 4; ++c) A[r][c] -= f * A[k][c];
        }
    }
    return {A[0][3] / A[0][0], A[1][3] / A[1][1], A[2][3] / A[2][2]};
}

double range_of(const std::vector<double>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

}  // namespace

CosineFit fit_cosine(const std::vector<double>& phi, const std::vector<double>& y) {
    if (phi.size() != y.size() || phi.size() < 3) throw ParameterError("cosine fit needs at least 3 points");
    std::vector<std::array<double, 3>> X;
    for (double p : phi) X.push_back({1.0, std::cos(p), std::sin(p)});
    auto c = lsq3(X, y);
    CosineFit f;
    f.c0 = c[0];
    f.c1 = std::hypot(c[1], c[2]);  // non-negative by construction
    f.phi0 = wrap_phase(std::atan2(c[2], c[1]));
    double ss = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        double d = y[i] - (c[0] + c[1] * X[i][1] + c[2] * X[i][2]);
        ss += d * d;
    }
    f.residual = std::sqrt(ss / y.size());
    return f;
}

QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3) throw ParameterError("quadratic fit needs at least 3 points");
    std::vector<std::array<double, 3>> X;
    for (double v : x) X.push_back({1.0, v, v * v});
    auto c = lsq3(X, y);
    QuadraticFit f{c[0], c[1], c[2], 0};
    double ss = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        double d = y[i] - (c[0] + c[1] * x[i] + c[2] * x[i] * x[i]);
        ss += d * d;
    }
    f.residual = std::sqrt(ss / y.size());
    return f;
}

double probe_ix(const System& sys, const std::vector<SecondaryHologramSpec>& specs, double site) {
    auto v = sys.measure(specs, {site, 0.0});
    if (!(v[1] > 0)) throw MeasurementError("no light at the addressed spot");
    return v[0] / v[1];
}

ScanResult scan_phase(const System& sys, std::vector<SecondaryHologramSpec> specs, size_t index, double probe,
                      int n, double amplitude) {
    if (n < 8) throw ParameterError("phase scan needs at least 8 points");
    if (index >= specs.size()) throw ParameterError("scan index out of range");
    ScanResult r;
    specs[index].grating.amplitude = amplitude;
    for (int k = 0; k < n; ++k) {
        double phi = 2 * M_PI * k / n;
        specs[index].grating.phase = phi;
        r.parameter_values.push_back(phi);
        r.intensities.push_back(probe_ix(sys, specs, probe));
        r.excluded.push_back(false);
    }
    CosineFit f = fit_cosine(r.parameter_values, r.intensities);
    r.fit_params = {f.c0, f.c1, f.phi0};
    double span = range_of(r.intensities);
    r.fit_residual_rms = span > 0 ? f.residual / span : 0;
    r.optimum = wrap_phase(f.phi0 + M_PI);
    if (f.c1 < 3 * f.residual) {
        r.defined = false;
        r.diagnostic = "no interference contrast";
    }
    return r;
}

ScanResult scan_amplitude(const System& sys, std::vector<SecondaryHologramSpec> specs, size_t index, double probe,
                          int n, double phase, double exclusion) {
    if (n < 6) throw ParameterError("amplitude scan needs at least 6 points");
    if (index >= specs.size()) throw ParameterError("scan index out of range");
    ScanResult r;
    specs[index].grating.phase = phase;
    std::vector<double> fx, fy;
    for (int k = 0; k < n; ++k) {
        double a = exclusion * k / (n - 1);
        specs[index].grating.amplitude = a;
        double v = probe_ix(sys, specs, probe);
        bool ex = a >= exclusion - 1e-12;
        r.parameter_values.push_back(a);
        r.intensities.push_back(v);
        r.excluded.push_back(ex);
        if (!ex) {
            fx.push_back(a);
            fy.push_back(v);
        }
    }
    QuadraticFit q = fit_quadratic(fx, fy);
    r.fit_params = {q.q0, q.q1, q.q2};
    double span = range_of(fy);
    r.fit_residual_rms = span > 0 ? q.residual / span : 0;
    if (!(q.q2 > 0)) {
        r.defined = false;
        r.diagnostic = "non-convex amplitude response";
        r.optimum = NAN;
        return r;
    }
    double v = -q.q1 / (2 * q.q2);
    r.extrapolated = v < fx.front() || v > fx.back();
    r.optimum = std::clamp(v, 0.0, 1.0);
    return r;
}

GridMap grid_search(const System& sys, std::vector<SecondaryHologramSpec> specs, size_t index, double probe,
                    const std::vector<double>& phases, const std::vector<double>& amps) {
    if (phases.empty() || amps.empty()) throw ParameterError("grid search needs non-empty grids");
    if (index >= specs.size()) throw ParameterError("scan index out of range");
    GridMap g{phases, amps, {}, 0, 0};
    double best = INFINITY;
    for (size_t a = 0; a < amps.size(); ++a)
        for (size_t p = 0; p < phases.size(); ++p) {
            specs[index].grating.amplitude = amps[a];
            specs[index].grating.phase = phases[p];
            double v = probe_ix(sys, specs, probe);
            g.ix.push_back(v);
            if (v < best) {
                best = v;
                g.min_amplitude = a;
                g.min_phase = p;
            }
        }
    return g;
}

namespace {

char* fmt_site(double a) {
    static thread_local char buf[32];
    std::snprintf(buf, sizeof buf, "%g", a);
    return buf;
}

}  // namespace

OptimizeResult optimize_sites(const System& sys, const std::vector<double>& sites, const OptimizeOptions& opt) {
    OptimizeResult res;
    if (sites.empty()) return res;
    if (static_cast<int>(sites.size()) > opt.max_holograms)
        throw CapacityError("more sites than secondary holograms allowed");
    std::set<double> uniq(sites.begin(), sites.end());
    if (uniq.size() != sites.size()) throw ParameterError("sites must be distinct");
    if (uniq.count(0.0)) throw ParameterError("site 0 is the addressed spot");

    // (1) baseline
    std::vector<double> probe_sites = sites;
    probe_sites.push_back(0.0);
    auto base = sys.measure({}, probe_sites);
    const double peak0 = base.back();
    if (!(peak0 > 0)) throw MeasurementError("no light at the addressed spot");

    // (2) amplitude seed from a reference grating measured on its own
    std::vector<double> seed(sites.size());
    for (size_t i = 0; i < sites.size(); ++i) {
        SecondaryHologramSpec ref;
        ref.grating = sys.grating_for(sites[i]);
        ref.grating.amplitude = opt.reference_amplitude;
        ref.window = sys.windows_for({{ref.grating}}).front();
        ref.site = sites[i];
        double aux = sys.measure({ref}, {sites[i]}, false).front();
        double a = aux > 0 ? opt.reference_amplitude * std::sqrt(base[i] / aux) : 1.0;
        seed[i] = std::clamp(a, 0.02, 1.0);
    }

    // (3) nearest first, then pair sites of comparable amplitude
    std::vector<size_t> order(sites.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        double x = std::abs(sites[a]), y = std::abs(sites[b]);
        return x != y ? x < y : sites[a] < sites[b];
    });
    std::vector<int> group(sites.size(), -1);
    std::vector<std::vector<size_t>> members;
    for (size_t oi = 0; oi < order.size(); ++oi) {
        size_t i = order[oi];
        if (group[i] >= 0) continue;
        group[i] = static_cast<int>(members.size());
        members.push_back({i});
        for (size_t oj = oi + 1; oj < order.size(); ++oj) {
            size_t j = order[oj];
            if (group[j] >= 0) continue;
            double ratio = std::max(seed[i], seed[j]) / std::min(seed[i], seed[j]);
            if (ratio <= 2.0) {
                group[j] = group[i];
                members.back().push_back(j);
                break;
            }
        }
    }
    std::vector<std::vector<GratingSpec>> gg;
    for (const auto& m : members) {
        gg.emplace_back();
        for (size_t i : m) gg.back().push_back(sys.grating_for(sites[i]));
    }
    std::vector<WindowSpec> wins = sys.windows_for(gg);

    // holograms start dark (A_s = 0) and are switched on when their turn comes
    std::vector<SecondaryHologramSpec>& specs = res.specs;
    std::vector<size_t> spec_of(sites.size());
    for (size_t i : order) {
        SecondaryHologramSpec s;
        s.grating = sys.grating_for(sites[i]);
        s.grating.amplitude = 0;
        s.grating.phase = 0;
        s.window = wins[static_cast<size_t>(group[i])];
        s.site = sites[i];
        s.group = group[i];
        spec_of[i] = specs.size();
        specs.push_back(s);
    }

    // keep the fitted optimum only if it beats the best measured scan point
    auto settle = [&](size_t k, const ScanResult& r, bool is_phase) {
        double cur_best = INFINITY, cur_par = 0;
        for (size_t j = 0; j < r.parameter_values.size(); ++j)
            if (r.intensities[j] < cur_best) {
                cur_best = r.intensities[j];
                cur_par = r.parameter_values[j];
            }
        auto trial = specs;
        if (r.defined && std::isfinite(r.optimum)) {
            if (is_phase)
                trial[k].grating.phase = r.optimum;
            else
                trial[k].grating.amplitude = r.optimum;
            if (probe_ix(sys, trial, specs[k].site) <= cur_best) {
                specs = trial;
                return;
            }
        }
        if (is_phase)
            specs[k].grating.phase = cur_par;
        else
            specs[k].grating.amplitude = cur_par;
    };

    // (4) phase scans, in order
    for (size_t i : order) {
        size_t k = spec_of[i];
        specs[k].grating.amplitude = seed[i];
        ScanResult r = scan_phase(sys, specs, k, sites[i], opt.phase_points, seed[i]);
        res.traces.push_back({std::string("phase site=") + fmt_site(sites[i]) + " pass=1", r});
        settle(k, r, true);
    }
    // (5) amplitude scans at the chosen phases
    for (size_t i : order) {
        size_t k = spec_of[i];
        ScanResult r = scan_amplitude(sys, specs, k, sites[i], opt.amplitude_points, specs[k].grating.phase,
                                      opt.amplitude_max);
        res.traces.push_back({std::string("amplitude site=") + fmt_site(sites[i]) + " pass=1", r});
        settle(k, r, false);
    }
    // (6) refinement against cross-coupling: phase-only in the first round,
    // phase and amplitude after that
    const int rounds = opt.resweep ? std::max(1, opt.refine_rounds) : 0;
    for (int round = 0; round < rounds; ++round)
        for (int what = 0; what < (round == 0 ? 1 : 2); ++what)
            for (size_t i : order) {
                size_t k = spec_of[i];
                ScanResult r = what == 0
                                   ? scan_phase(sys, specs, k, sites[i], opt.phase_points, specs[k].grating.amplitude)
                                   : scan_amplitude(sys, specs, k, sites[i], opt.amplitude_points,
                                                    specs[k].grating.phase, opt.amplitude_max);
                res.traces.push_back({std::string(what == 0 ? "phase" : "amplitude") + " site=" + fmt_site(sites[i]) +
                                          " pass=" + std::to_string(round + 2),
                                      r});
                // the refinement must not undo the current setting
                double before = probe_ix(sys, specs, sites[i]);
                auto keep = specs;
                settle(k, r, what == 0);
                if (probe_ix(sys, specs, sites[i]) > before) specs = keep;
            }

    // carving a window out of the primary can by itself cost more than the hologram
    // gains back; such a hologram is dropped so no site ends up above its baseline
    std::vector<bool> active(sites.size(), true);
    // keeps the optimization order: the lead member of a group sets its threshold shift
    std::vector<size_t> site_of(sites.size());
    for (size_t i = 0; i < sites.size(); ++i) site_of[spec_of[i]] = i;
    auto live_specs = [&] {
        std::vector<SecondaryHologramSpec> v;
        for (size_t k = 0; k < specs.size(); ++k)
            if (active[site_of[k]]) v.push_back(specs[k]);
        return v;
    };
    auto worst_excess = [&](const std::vector<double>& v) {
        double e = 0;
        for (size_t i = 0; i < sites.size(); ++i) e = std::max(e, (v[i] / v.back()) / (base[i] / peak0));
        return e;
    };
    auto after = sys.measure(specs, probe_sites);
    // greedy: drop whichever hologram brings the worst site down the most
    while (worst_excess(after) > 1) {
        size_t pick = sites.size();
        double best_e = INFINITY;
        std::vector<double> best_v;
        for (size_t j = 0; j < sites.size(); ++j) {
            if (!active[j]) continue;
            active[j] = false;
            auto v = sys.measure(live_specs(), probe_sites);
            active[j] = true;
            double e = worst_excess(v);
            if (e < best_e) {
                best_e = e;
                pick = j;
                best_v = v;
            }
        }
        if (pick == sites.size()) break;
        active[pick] = false;
        after = best_v;
    }
    std::vector<SecondaryHologramSpec> kept = live_specs();
    for (size_t i = 0; i < sites.size(); ++i) {
        SitePlan p;
        p.active = active[i];
        p.site = sites[i];
        p.group = group[i];
        p.grating = specs[spec_of[i]].grating;
        p.before_db = 10 * std::log10(base[i] / peak0);
        p.after_db = 10 * std::log10(after[i] / after.back());
        p.seeded_amplitude = seed[i];
        res.plans.push_back(p);
    }
    specs = kept;
    return res;
}

BeamCenter calibrate_beam_center(const PowerProbe& probe, int rows, int cols, double min_power, int fine_half) {
    if (rows < 1 || cols < 1) throw ParameterError("empty IP1 region");
    BeamCenter out;
    std::vector<std::uint8_t> mask(static_cast<size_t>(rows) * cols, 0);
    auto block_power = [&](int r0, int r1, int c0, int c1) {
        std::fill(mask.begin(), mask.end(), 0);
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) mask[static_cast<size_t>(r) * cols + c] = 1;
        ++out.measurements;
        return probe(mask);
    };
    // ties go to the lower index; tiny relative differences count as ties
    auto better = [](double cand, double best) { return cand > best * (1 + 1e-9) + 1e-300; };

    int r0 = 0, r1 = rows, c0 = 0, c1 = cols;
    if (!(block_power(r0, r1, c0, c1) > min_power)) throw MeasurementError("no beam found");
    while ((r1 - r0) > 4 || (c1 - c0) > 4) {
        if ((c1 - c0) >= (r1 - r0)) {
            int m = (c0 + c1) / 2;
            double a = block_power(r0, r1, c0, m), b = block_power(r0, r1, m, c1);
            if (!(std::max(a, b) > min_power)) throw MeasurementError("no beam found");
            if (better(b, a)) c0 = m; else c1 = m;
        } else {
            int m = (r0 + r1) / 2;
            double a = block_power(r0, m, c0, c1), b = block_power(m, r1, c0, c1);
            if (!(std::max(a, b) > min_power)) throw MeasurementError("no beam found");
            if (better(b, a)) r0 = m; else r1 = m;
        }
    }
    int rc = (r0 + r1 - 1) / 2, cc = (c0 + c1 - 1) / 2;
    // fine: single mirrors along x, then along y through the best column
    double best = -1;
    int bx = cc;
    for (int c = std::max(0, cc - fine_half); c <= std::min(cols - 1, cc + fine_half); ++c) {
        double v = block_power(rc, rc + 1, c, c + 1);
        if (best < 0 || better(v, best)) {
            best = v;
            bx = c;
        }
    }
    best = -1;
    int by = rc;
    for (int r = std::max(0, rc - fine_half); r <= std::min(rows - 1, rc + fine_half); ++r) {
        double v = block_power(r, r + 1, bx, bx + 1);
        if (best < 0 || better(v, best)) {
            best = v;
            by = r;
        }
    }
    if (!(best > min_power)) throw MeasurementError("no beam found");
    out.row = by;
    out.col = bx;
    return out;
}

PowerProbe double_pass_power_probe(const Train& train, const DmdPattern& fp1_pattern) {
    auto ip1 = std::make_shared<Field>(train.ip1_field(fp1_pattern));
    const Train* t = &train;
    DmdPattern base = fp1_pattern;
    return [t, ip1, base](const std::vector<std::uint8_t>& mask) {
        DmdPattern p = base;
        const int cols = p.ip1_cols();
        for (int r = 0; r < p.rows; ++r)
            for (int c = 0; c < cols; ++c) p.ip1(r, c) = mask[static_cast<size_t>(r) * cols + c];
        Field m = apply_mask(*ip1, p, Region::IP1, t->anchor());
        const auto& s = t->setup();
        Field out = relay_image(m, s.cfg, s.relay ? &*s.relay : nullptr, s.as2);
        return out.power();
    };
}

std::string scan_table(const std::vector<ScanTrace>& traces) {
    std::string out = "scan\tparameter\tI_X_dB\texcluded\tfit_residual\toptimum\n";
    char buf[200];
    for (const auto& t : traces)
        for (size_t i = 0; i < t.scan.parameter_values.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s\t%.4f\t%.2f\t%d\t%.4f\t%.4f\n", t.label.c_str(),
                          t.scan.parameter_values[i], 10 * std::log10(t.scan.intensities[i]),
                          t.scan.excluded[i] ? 1 : 0, t.scan.fit_residual_rms, t.scan.optimum);
            out += buf;
        }
    return out;
}

std::string plan_table(const std::vector<SitePlan>& plans) {
    std::string out = "site_w\tgroup\tactive\tA_s\tPhi_s\tseed_A_s\tbefore_dB\tafter_dB\n";
    char buf[200];
    for (const auto& p : plans) {
        std::snprintf(buf, sizeof buf, "%.3f\t%d\t%d\t%.4f\t%.4f\t%.4f\t%.2f\t%.2f\n", p.site, p.group, p.active ? 1 : 0,
                      p.grating.amplitude, p.grating.phase, p.seeded_amplitude, p.before_db, p.after_db);
        out += buf;
    }
    return out;
}

}  // namespace dmdx
