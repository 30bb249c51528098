#include <map>
#include <random>

#include "common.hpp"
#include "dmdx/errors.hpp"
#include "dmdx/rng.hpp"

using namespace dmdx;
using namespace testing_support;

namespace {

// complex first-order amplitude of a window at the grating's spatial frequency
std::complex<double> first_order(const BinaryGrid& b, const WindowSpec& w, const GratingSpec& gs, const Geometry& g) {
    const double kx = 2 * M_PI * gs.xa_x / g.lf, ky = 2 * M_PI * gs.xa_y / g.lf;
    std::complex<double> acc = 0;
    for (int r = 0; r < w.rows; ++r)
        for (int c = 0; c < w.cols; ++c)
            if (b.at(r, c)) acc += std::polar(1.0, -(kx * g.fp1_x(w.col0 + c) + ky * g.fp1_y(w.row0 + r)));
    return acc;
}

SecondaryHologramSpec centre_spec(const OpticalConfig& cfg, const HologramOptions& h, double site, double amp) {
    AddressingTarget t = make_target(cfg, 60e-6);
    GratingSpec gs = grating_for_site(t, site, cfg, amp, 0.0);
    auto w = allocate_windows({{gs}}, cfg, h);
    return {gs, w[0], site, 0};
}

Field flat_illumination(const Geometry& g) {
    Field f(g.rows, g.fp1, g.pitch, g.pitch, Plane::FP1);
    for (auto& z : f.data) z = 1.0;
    return f;
}

}  // namespace

TEST_CASE("random binarization is deterministic and rejects values outside [0, 1]") {
    RealGrid c(32, 32, 0.4);
    CHECK(random_binarize(c, 7).v == random_binarize(c, 7).v);
    CHECK(random_binarize(c, 7).v != random_binarize(c, 8).v);
    c.at(3, 3) = 1.2;
    CHECK_THROWS_AS(random_binarize(c, 1), ParameterError);
    c.at(3, 3) = -0.1;
    CHECK_THROWS_AS(random_binarize(c, 1), ParameterError);
}

TEST_CASE("random binarization is unbiased within 3 sigma per 16x16 block over 100 seeds") {
    const int n = 128;
    RealGrid c(n, n);
    for (int r = 0; r < n; ++r)
        for (int k = 0; k < n; ++k) c.at(r, k) = 0.5 + 0.45 * std::sin(0.07 * r) * std::cos(0.05 * k);
    std::vector<double> ones(static_cast<size_t>(n) * n, 0.0);
    const int seeds = 100;
    for (int s = 0; s < seeds; ++s) {
        auto b = random_binarize(c, 1000 + s);
        for (size_t i = 0; i < ones.size(); ++i) ones[i] += b.v[i];
    }
    int worst_ok = 1;
    for (int br = 0; br < n; br += 16)
        for (int bc = 0; bc < n; bc += 16) {
            double got = 0, mean = 0, var = 0;
            for (int r = br; r < br + 16; ++r)
                for (int k = bc; k < bc + 16; ++k) {
                    double p = c.at(r, k);
                    got += ones[static_cast<size_t>(r) * n + k];
                    mean += seeds * p;
                    var += seeds * p * (1 - p);
                }
            if (std::abs(got - mean) > 3 * std::sqrt(var)) worst_ok = 0;
        }
    CHECK(worst_ok == 1);
}

TEST_CASE("threshold shift reads the same thresholds cyclically") {
    RealGrid c(2, 50, 0.5);
    auto a = random_binarize_shifted(c, 3, 0);
    auto b = random_binarize_shifted(c, 3, 7);
    for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 50; ++k) CHECK(b.at(r, k) == a.at(r, (k + 7) % 50));
    CHECK(random_binarize_shifted(c, 3, -43).v == b.v);
}

TEST_CASE("lag-2 error diffusion puts no quantisation noise at the period-4 carrier") {
    const int rows = 256, cols = 8;
    RealGrid f(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) f.at(r, c) = 0.3 + 0.2 * std::cos(0.01 * r * (c + 1));
    auto b = error_diffuse_lag2(f);
    for (int c = 0; c < cols; ++c) {
        std::complex<double> carrier = 0;
        double total = 0;
        for (int r = 0; r < rows; ++r) {
            double e = b.at(r, c) - f.at(r, c);
            carrier += e * std::polar(1.0, -M_PI / 2 * r);
            total += e * e;
        }
        // only the two boundary rows leak; white noise would give |carrier|^2 ~ total
        CHECK(std::norm(carrier) <= 4.0);
        CHECK(total > 10.0);
    }
}

TEST_CASE("secondary continuous map follows the grating and stays in [0, 1]") {
    OpticalConfig cfg = small_optics();
    Geometry g = Geometry::from(cfg);
    HologramOptions h = small_hologram();
    Field illum = gaussian_illumination(cfg, g.rows, g.fp1);
    auto comp = zero_aberration(g.rows, g.fp1);
    auto s = centre_spec(cfg, h, 4, 1.0);
    RealGrid F = secondary_continuous(s, illum, comp, cfg, h);
    double mx = 0, mn = 1;
    for (double v : F.v) {
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    CHECK(mn >= 0.0);
    CHECK(mx <= 1.0);
    CHECK(mx > 0.9);  // A_s = 1 uses the full range at the dimmest pixel
    s.grating.amplitude = 0.0;
    for (double v : secondary_continuous(s, illum, comp, cfg, h).v) CHECK(v == 0.0);
    s.grating.amplitude = 1.5;
    CHECK_THROWS_AS(secondary_continuous(s, illum, comp, cfg, h), ParameterError);

    // window at the dark edge of a narrow beam: clamp warning
    cfg.illumination_waist = 0.2e-3;
    Field narrow = gaussian_illumination(cfg, g.rows, g.fp1);
    s.grating.amplitude = 0.5;
    std::vector<std::string> warn;
    secondary_continuous(s, narrow, comp, cfg, h, &warn);
    CHECK(warn.size() == 1);
}

TEST_CASE("first-order amplitude of the binarized window is linear in A_s") {
    OpticalConfig cfg = small_optics();
    Geometry g = Geometry::from(cfg);
    HologramOptions h = small_hologram();
    Field illum = flat_illumination(g);
    auto comp = zero_aberration(g.rows, g.fp1);
    std::vector<double> A, amp;
    for (double a = 0.1; a <= 0.8001; a += 0.1) {
        auto s = centre_spec(cfg, h, 4, a);
        std::complex<double> mean = 0;
        const int seeds = 50;
        for (int k = 0; k < seeds; ++k) {
            auto b = group_window({&s}, illum, comp, cfg, 500 + k, h);
            mean += first_order(b, s.window, s.grating, g);
        }
        A.push_back(a);
        amp.push_back(std::abs(mean) / seeds);
    }
    // least squares line and R^2
    double n = static_cast<double>(A.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < A.size(); ++i) {
        sx += A[i];
        sy += amp[i];
        sxx += A[i] * A[i];
        sxy += A[i] * amp[i];
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx), icpt = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (size_t i = 0; i < A.size(); ++i) {
        ss_res += std::pow(amp[i] - slope * A[i] - icpt, 2);
        ss_tot += std::pow(amp[i] - sy / n, 2);
    }
    CHECK(1 - ss_res / ss_tot >= 0.99);
    // expected slope: a quarter of the window pixel count
    auto s = centre_spec(cfg, h, 4, 0.5);
    CHECK(slope == doctest::Approx(s.window.rows * s.window.cols / 4.0).epsilon(0.05));
}

TEST_CASE("phase shift and lateral content shift give the same far field") {
    OpticalConfig cfg = small_optics();
    Geometry g = Geometry::from(cfg);
    HologramOptions h = small_hologram();
    Field illum = flat_illumination(g);
    auto comp = zero_aberration(g.rows, g.fp1);
    auto s = centre_spec(cfg, h, 4, 0.6);
    const double per = grating_period_px(s.grating, cfg);
    // a whole turn is bit-identical
    auto turned = s;
    turned.grating = shift_grating(s.grating, 2 * M_PI);
    CHECK(secondary_continuous(turned, illum, comp, cfg, h).v == secondary_continuous(s, illum, comp, cfg, h).v);

    const int px = 5;
    const double delta = 2 * M_PI * px / per;
    auto moved = s;
    moved.grating = shift_grating(s.grating, delta);
    auto b0 = group_window({&s}, illum, comp, cfg, 9, h);
    auto b1 = group_window({&moved}, illum, comp, cfg, 9, h);
    // content path: slide the unshifted binary window by px, cyclically
    BinaryGrid slid = b0;
    for (int r = 0; r < b0.rows; ++r)
        for (int c = 0; c < b0.cols; ++c) slid.v[static_cast<size_t>(r) * b0.cols + c] = b0.at(r, (c + px) % b0.cols);
    auto e1 = first_order(b1, s.window, s.grating, g), e2 = first_order(slid, s.window, s.grating, g);
    // binomial noise scale of a first-order amplitude
    double noise = std::sqrt(s.window.rows * s.window.cols * 0.25);
    CHECK(std::abs(std::abs(e1) - std::abs(e2)) < 3 * noise);
    CHECK(std::abs(std::arg(e1 / e2)) < 0.2);
    // and the phase moved by delta
    auto e0 = first_order(b0, s.window, s.grating, g);
    CHECK(std::abs(std::remainder(std::arg(e1 / e0) - delta, 2 * M_PI)) < 0.2);
}

TEST_CASE("multiplex changes only the window pixels") {
    TrainSetup st = small_setup();
    Geometry g = Geometry::from(st.cfg);
    DmdPattern primary = small_primary(st);
    GratingSpec a = grating_for_site(st.target, 4, st.cfg, 0.4, 1.0);
    GratingSpec b = grating_for_site(st.target, -4, st.cfg, 0.3, 2.0);
    GratingSpec c = grating_for_site(st.target, 8, st.cfg, 0.2, 0.5);
    auto w = allocate_windows({{a, b}, {c}}, st.cfg, st.hopt);
    std::vector<SecondaryHologramSpec> specs = {{a, w[0], 4, 0}, {b, w[0], -4, 0}, {c, w[1], 8, 1}};
    DmdPattern out = multiplex(primary, specs, st.illum, st.compensation, st.cfg, 3, st.hopt);
    auto inside = [&](int r, int col) {
        for (const auto& x : w)
            if (r >= x.row0 && r < x.row0 + x.rows && col >= x.col0 && col < x.col0 + x.cols) return true;
        return false;
    };
    long outside_diff = 0;
    for (int r = 0; r < out.rows; ++r)
        for (int col = 0; col < out.cols; ++col)
            if (!inside(r, col) && out.at(r, col) != primary.at(r, col)) ++outside_diff;
    CHECK(outside_diff == 0);
    auto g0 = group_window({&specs[0], &specs[1]}, st.illum, st.compensation, st.cfg, 3, st.hopt);
    for (int r = 0; r < w[0].rows; ++r)
        for (int col = 0; col < w[0].cols; ++col) CHECK(out.at(w[0].row0 + r, w[0].col0 + col) == g0.at(r, col));
    CHECK(multiplex(primary, {}, st.illum, st.compensation, st.cfg, 3, st.hopt) == primary);
    CHECK(multiplex(primary, specs, st.illum, st.compensation, st.cfg, 3, st.hopt) == out);
    (void)g;
}

TEST_CASE("multiplexing rules") {
    OpticalConfig cfg = small_optics();
    Geometry g = Geometry::from(cfg);
    HologramOptions h = small_hologram();
    AddressingTarget t = make_target(cfg, 60e-6);
    GratingSpec gs = grating_for_site(t, 4, cfg);
    auto w = allocate_windows({{gs}, {gs}}, cfg, h);
    SecondaryHologramSpec s{gs, w[0], 4, 0};

    SUBCASE("three in one group") {
        CHECK_THROWS_AS(check_secondaries({s, s, s}, g), RuleViolation);
    }
    SUBCASE("overlay partners must share the window") {
        auto other = s;
        other.window = w[1];
        CHECK_THROWS_AS(check_secondaries({s, other}, g), RuleViolation);
    }
    SUBCASE("separate groups must not overlap") {
        auto other = s;
        other.group = 1;
        other.window.row0 += 1;
        CHECK_THROWS_AS(check_secondaries({s, other}, g), RuleViolation);
        other.window = w[1];
        CHECK_NOTHROW(check_secondaries({s, other}, g));
    }
    SUBCASE("window inside FP1") {
        auto bad = s;
        bad.window.col0 = g.fp1 - 10;
        CHECK_THROWS_AS(check_secondaries({bad}, g), RuleViolation);
    }
    SUBCASE("at most eight") {
        std::vector<std::vector<GratingSpec>> groups(9, std::vector<GratingSpec>{gs});
        auto ws = allocate_windows(groups, cfg, h);
        std::vector<SecondaryHologramSpec> specs;
        for (int k = 0; k < 9; ++k) specs.push_back({gs, ws[static_cast<size_t>(k)], 4.0 + k, k});
        CHECK_THROWS_AS(check_secondaries(specs, g), CapacityError);
    }
}

TEST_CASE("window allocation stacks along y with guard rows and whole periods") {
    OpticalConfig cfg = small_optics();
    HologramOptions h = small_hologram();
    AddressingTarget t = make_target(cfg, 60e-6);
    std::vector<std::vector<GratingSpec>> groups;
    for (double a : {4.0, 8.0, -12.0, 6.0}) groups.push_back({grating_for_site(t, a, cfg)});
    auto w = allocate_windows(groups, cfg, h);
    REQUIRE(w.size() == 4);
    Geometry g = Geometry::from(cfg);
    CHECK(w[0].row0 == g.rows / 2 - h.window_rows / 2);
    for (size_t i = 0; i < w.size(); ++i) {
        CHECK(w[i].cols >= 0.8 * h.window_cols);
        CHECK(w[i].cols <= 1.2 * h.window_cols);
        double cyc = w[i].cols / std::abs(grating_period_px(groups[i][0], cfg));
        CHECK(std::abs(cyc - std::round(cyc)) < 0.1);
        for (size_t j = i + 1; j < w.size(); ++j) {
            CHECK_FALSE(w[i].overlaps(w[j]));
            int gap = std::max(w[j].row0 - (w[i].row0 + w[i].rows), w[i].row0 - (w[j].row0 + w[j].rows));
            CHECK(gap >= h.guard_rows);
        }
    }
    h.window_rows = 100;
    CHECK_THROWS_AS(allocate_windows(groups, cfg, h), CapacityError);
}

TEST_CASE("IFTA primary: deterministic, focuses at X0 with the requested waist") {
    TrainSetup st = small_setup(0.0);
    DmdPattern p1 = small_primary(st);
    CHECK(p1 == small_primary(st));
    HologramOptions rnd = st.hopt;
    rnd.primary_quantizer = Quantizer::Random;
    auto r1 = ifta_primary(st.target, st.illum, st.compensation, 5, 1, st.cfg, rnd);
    CHECK(r1 == ifta_primary(st.target, st.illum, st.compensation, 5, 1, st.cfg, rnd));
    CHECK_FALSE(r1 == ifta_primary(st.target, st.illum, st.compensation, 5, 2, st.cfg, rnd));

    Train t(st);
    Field f = t.observe(p1);
    auto [r0, c0] = t.sample_of(0);
    // brightest point near the target is the target sample
    double best = 0;
    int br = 0, bc = 0;
    for (int dr = -4; dr <= 4; ++dr)
        for (int dc = -4; dc <= 4; ++dc)
            if (std::norm(f.at(r0 + dr, c0 + dc)) > best) {
                best = std::norm(f.at(r0 + dr, c0 + dc));
                br = r0 + dr;
                bc = c0 + dc;
            }
    CHECK(br == r0);
    CHECK(bc == c0);
    auto prof = extract_profile_at(f, r0, c0, 0.0, 1, -300);
    CHECK(fit_waist(prof).waist == doctest::Approx(st.target.waist).epsilon(0.05));
    CHECK_THROWS_AS(ifta_baseband(st.target, st.illum, st.cfg, 0), ParameterError);
    AddressingTarget far = st.target;
    far.x0_x = 1.0;
    CHECK_THROWS_AS(ifta_baseband(far, st.illum, st.cfg, 3), ParameterError);
}
