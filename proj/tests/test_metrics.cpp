#include "common.hpp"
#include "dmdx/errors.hpp"

using namespace dmdx;

namespace {

Field gaussian_spot(int n, double pitch, double w, double cx = 0, double cy = 0) {
    Field f(n, n, pitch, pitch, Plane::IP1);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            double x = f.x(c) - cx, y = f.y(r) - cy;
            f.at(r, c) = std::exp(-(x * x + y * y) / (w * w));
        }
    return f;
}

CrosstalkProfile line(std::vector<double> xs, std::vector<double> is) {
    CrosstalkProfile p;
    p.positions = std::move(xs);
    p.intensities = std::move(is);
    return p;
}

}  // namespace

TEST_CASE("profile of an ideal Gaussian spot") {
    const double w = 20e-6, pitch = 1e-6;
    Field f = gaussian_spot(256, pitch, w);
    auto p = extract_profile(f, 0.0, 1, -300);
    for (size_t i = 0; i < p.positions.size(); ++i) {
        double x = p.positions[i];
        if (std::abs(x) > 3 * w) continue;
        CHECK(std::abs(p.intensities[i] - std::exp(-2 * x * x / (w * w))) < 1e-4);
    }
    CHECK(p.peak_row == 128);
    CHECK(p.peak_col == 128);
    CHECK(*std::max_element(p.intensities.begin(), p.intensities.end()) == 1.0);
}

TEST_CASE("detector floor") {
    Field f = gaussian_spot(128, 1e-6, 5e-6);
    auto p = extract_profile(f, 0.0, 3, -60);
    for (double v : p.intensities) CHECK(v >= 1e-6);
    auto once = p;
    apply_floor(once, -60);
    auto twice = once;
    apply_floor(twice, -60);
    CHECK(once.intensities == twice.intensities);
    CHECK(once.intensities == p.intensities);
}

TEST_CASE("axis rotated by pi mirrors the profile") {
    Field f = gaussian_spot(128, 1e-6, 6e-6, 3e-6, -2e-6);
    f.at(70, 90) += 0.3;  // break the symmetry
    auto a = extract_profile_at(f, 62, 67, 0.0, 3, -80);
    auto b = extract_profile_at(f, 62, 67, M_PI, 3, -80);
    // sample k of one is sample -k of the other
    const size_t mid = a.positions.size() / 2;
    for (size_t k = 1; k + 1 < mid; ++k) CHECK(a.intensities[mid + k] == doctest::Approx(b.intensities[mid - k]).epsilon(1e-12));
}

TEST_CASE("zero field has no peak") {
    Field f(16, 16, 1, 1, Plane::IP1);
    CHECK_THROWS_AS(extract_profile(f), MeasurementError);
}

TEST_CASE("relative crosstalk") {
    const double w = 1.0;
    auto p = line({-8, -4, 0, 4, 8}, {1e-5, 5.5e-5, 1.0, 5.5e-5, 1e-5});
    CHECK(relative_crosstalk(p, 4 * w) == doctest::Approx(-42.6).epsilon(0.0005));
    CHECK(relative_crosstalk(p, 0) == 0.0);
    CHECK(relative_crosstalk(p, 8) == doctest::Approx(-50.0).epsilon(1e-12));
    // sample positions return the sample's dB exactly
    for (size_t i = 0; i < p.positions.size(); ++i) CHECK(relative_crosstalk(p, p.positions[i]) == to_db(p.intensities[i]));
    // linear in intensity between samples
    CHECK(relative_crosstalk(p, 6) == doctest::Approx(to_db(0.5 * (5.5e-5 + 1e-5))).epsilon(1e-12));
    CHECK_THROWS_AS(relative_crosstalk(p, 9), ParameterError);
    CHECK_THROWS_AS(relative_crosstalk(p, -8.5), ParameterError);
}

TEST_CASE("I_X is invariant under scaling of the field") {
    Field f = gaussian_spot(128, 1e-6, 7e-6);
    f.at(64, 80) += 0.01;
    auto a = extract_profile(f, 0.0, 3, -60);
    // powers of two scale every intermediate exactly
    for (double s : {0.25, 2.0, 1024.0}) {
        Field g = f;
        for (auto& z : g.data) z *= s;
        auto b = extract_profile(g, 0.0, 3, -60);
        CHECK(b.intensities == a.intensities);
    }
    // other scales agree to rounding
    for (double s : {1e-6, 0.37, 250.0}) {
        Field g = f;
        for (auto& z : g.data) z *= s;
        auto b = extract_profile(g, 0.0, 3, -60);
        for (size_t i = 0; i < a.intensities.size(); ++i)
            CHECK(std::abs(b.intensities[i] - a.intensities[i]) <= 1e-14 * a.intensities[i]);
        CHECK(relative_crosstalk(b, 16e-6) == doctest::Approx(relative_crosstalk(a, 16e-6)).epsilon(1e-13));
    }
}

TEST_CASE("waist fit round trip over 5 to 40 um") {
    for (double w = 5e-6; w <= 40.01e-6; w += 2.5e-6) {
        Field f = gaussian_spot(512, 1e-6, w, 0.3e-6, 0);
        auto p = extract_profile(f, 0.0, 1, -300);
        auto fit = fit_waist(p);
        CHECK(std::abs(fit.waist - w) / w <= 0.005);
        CHECK_FALSE(fit.flagged);
    }
    // and the two named waists
    for (double w : {9e-6, 20e-6}) {
        auto fit = fit_waist(extract_profile(gaussian_spot(256, 1e-6, w), 0.0, 1, -300));
        CHECK(fit.waist == doctest::Approx(w).epsilon(0.005));
    }
}

TEST_CASE("hard-aperture spot is flagged as non-Gaussian") {
    OpticalConfig cfg;
    Field pupil(256, 256, 15.2e-6, 15.2e-6, Plane::FP2);
    for (auto& z : pupil.data) z = 1.0;
    pupil = fourier_aperture(pupil, 20 * 15.2e-6);
    Field spot = lens_fourier(pupil, cfg, Direction::Forward);
    auto fit = fit_waist(extract_profile(spot, 0.0, 1, -300));
    CHECK(fit.flagged);
    CHECK(fit.residual > 0.10);
}

TEST_CASE("effective aperture") {
    // plateau at -40 dB out to +-5, then below threshold
    std::vector<double> xs, is;
    for (int k = -20; k <= 20; ++k) {
        xs.push_back(k);
        is.push_back(k == 0 ? 1.0 : (std::abs(k) <= 5 ? 1e-4 : 1e-6));
    }
    auto p = line(xs, is);
    auto d = effective_aperture(p, -50);
    REQUIRE(d);
    // crossing between 5 and 6, linear in intensity
    double t = (1e-4 - 1e-5) / (1e-4 - 1e-6);
    CHECK(*d == doctest::Approx(2 * (5 + t)).epsilon(1e-12));
    // every sample beyond d'/2 is below threshold
    for (size_t i = 0; i < xs.size(); ++i)
        if (std::abs(xs[i]) > *d / 2) CHECK(to_db(is[i]) < -50);
    // never crossed
    auto flat = line({-2, -1, 0, 1, 2}, {1e-3, 1e-3, 1, 1e-3, 1e-3});
    CHECK_FALSE(effective_aperture(flat, -50).has_value());
}

TEST_CASE("profile table format") {
    auto p = line({-2e-6, 0, 2e-6}, {0.01, 1.0, 1e-6});
    CHECK(profile_table(p, 1e-6) == "position_w\tI_X_dB\n-2.000\t-20.00\n0.000\t0.00\n2.000\t-60.00\n");
}
