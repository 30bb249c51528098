#include "dmdx/double_pass.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "dmdx/errors.hpp"

namespace dmdx {

int pupil_mirrors(double d, double pitch) {
    if (!(d > 0)) throw ParameterError("pupil size must be positive");
    // smallest odd count that still covers d, so the pupil never cuts inside the requested square
    int n = static_cast<int>(std::ceil(d / pitch - 1e-9));
    if (n % 2 == 0) ++n;
    return std::max(n, 1);
}

PupilSpec centred_pupil(const Geometry& g, double d) {
    PupilSpec p;
    p.center_row = g.rows / 2;
    p.center_col = g.ip1 / 2;
    p.d = d;
    return p;
}

DmdPattern with_pupil(const DmdPattern& pattern, const std::optional<PupilSpec>& pupil, double pitch) {
    DmdPattern out = pattern;
    const int rows = out.rows, cols = out.ip1_cols();
    if (!pupil) {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) out.ip1(r, c) = 1;
        return out;
    }
    if (pupil->center_row < 0 || pupil->center_row >= rows || pupil->center_col < 0 || pupil->center_col >= cols)
        throw ParameterError("pupil centre outside the IP1 region");
    const int h = pupil_mirrors(pupil->d, pitch) / 2;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            int dr = r - pupil->center_row, dc = c - pupil->center_col;
            bool on = pupil->shape == StopShape::Square ? (std::abs(dr) <= h && std::abs(dc) <= h)
                                                        : (dr * dr + dc * dc <= h * h);
            // mirrors beyond the array simply do not exist, so large pupils clip to the region
            out.ip1(r, c) = on;
        }
    return out;
}

DoublePassResult simulate_double_pass(const TrainSetup& setup, const DmdPattern& fp1_pattern,
                                      const std::optional<PupilSpec>& pupil, double stray_floor, double threshold_db) {
    if (stray_floor < 0) throw ParameterError("stray floor must be non-negative");
    TrainSetup s = setup;
    s.double_pass = true;
    s.stray_amplitude = 0;
    Geometry g = Geometry::from(s.cfg);
    DmdPattern p = with_pupil(fp1_pattern, pupil, g.pitch);
    if (stray_floor > 0) {
        // stray level is set against this pattern's own IP1 peak
        Train probe(s);
        Field ip1 = probe.ip1_field(p);
        double pk = 0;
        for (const auto& z : ip1.data) pk = std::max(pk, std::norm(z));
        s.stray_amplitude = std::sqrt(stray_floor * pk);
    }
    Train t(s);
    DoublePassResult res;
    res.field_ip2 = t.observe(p);
    // other first-pass orders also reach IP2 away from the target, so the cut is
    // anchored on the local maximum next to the addressed spot, not the global one
    auto [r0, c0] = t.sample_of(0);
    const int n = res.field_ip2.rows;
    int br = r0, bc = c0;
    double best = -1;
    for (int dr = -3; dr <= 3; ++dr)
        for (int dc = -3; dc <= 3; ++dc) {
            int r = (r0 + dr + n) % n, c = (c0 + dc + n) % n;
            double v = std::norm(res.field_ip2.at(r, c));
            if (v > best) {
                best = v;
                br = r;
                bc = c;
            }
        }
    res.profile = extract_profile_at(res.field_ip2, br, bc, 0.0, s.patch, s.cfg.detector_floor_db);
    res.waist_ip2 = t.waist_at_observation();
    res.effective_aperture = effective_aperture(res.profile, threshold_db);
    return res;
}

std::vector<SweepPoint> aperture_sweep(const TrainSetup& setup, const DmdPattern& fp1_pattern,
                                       const std::vector<double>& d_values, double stray_floor, int threads,
                                       double threshold_db) {
    if (!std::is_sorted(d_values.begin(), d_values.end())) throw ParameterError("d values must be ascending");
    Geometry g = Geometry::from(setup.cfg);
    std::vector<SweepPoint> out(d_values.size());
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i; (i = next++) < d_values.size();) {
            auto r = simulate_double_pass(setup, fp1_pattern, centred_pupil(g, d_values[i]), stray_floor, threshold_db);
            out[i] = {d_values[i], r.effective_aperture};
        }
    };
    std::vector<std::thread> pool;
    for (int k = 1; k < threads && static_cast<size_t>(k) < d_values.size(); ++k) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return out;
}

CombinedResult combined_pipeline(const TrainSetup& setup, const DmdPattern& primary, const std::vector<double>& sites,
                                 std::optional<double> pupil_d, const OptimizeOptions& opt, double stray_floor) {
    Geometry g = Geometry::from(setup.cfg);
    std::optional<PupilSpec> pupil;
    if (pupil_d) pupil = centred_pupil(g, *pupil_d);
    DmdPattern base = with_pupil(primary, pupil, g.pitch);
    CombinedResult out;
    if (!sites.empty()) {
        TrainSetup s = setup;
        s.double_pass = true;
        s.stray_amplitude = 0;
        if (stray_floor > 0) {
            Train probe(s);
            Field ip1 = probe.ip1_field(base);
            double pk = 0;
            for (const auto& z : ip1.data) pk = std::max(pk, std::norm(z));
            s.stray_amplitude = std::sqrt(stray_floor * pk);
        }
        TrainSystem sys(std::make_shared<const Train>(s), base);
        out.optimized = optimize_sites(sys, sites, opt);
        out.pattern = sys.pattern(out.optimized.specs);
    } else {
        out.pattern = base;
    }
    out.result = simulate_double_pass(setup, out.pattern, pupil, stray_floor);
    return out;
}

}  // namespace dmdx
