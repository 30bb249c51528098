#include "common.hpp"
#include "dmdx/errors.hpp"

using namespace dmdx;
using namespace testing_support;

namespace {

std::vector<SecondaryHologramSpec> two_sites(const TrainSystem& sys) {
    std::vector<double> sites{4.0, -8.0};
    std::vector<std::vector<GratingSpec>> groups{{sys.grating_for(4.0)}, {sys.grating_for(-8.0)}};
    auto wins = sys.windows_for(groups);
    std::vector<SecondaryHologramSpec> specs;
    for (size_t i = 0; i < sites.size(); ++i) {
        SecondaryHologramSpec s;
        s.grating = groups[i][0];
        s.grating.amplitude = 0.3 + 0.2 * static_cast<double>(i);
        s.grating.phase = 1.0 + static_cast<double>(i);
        s.window = wins[i];
        s.site = sites[i];
        s.group = static_cast<int>(i);
        specs.push_back(s);
    }
    return specs;
}

void check_superposition(const TrainSetup& s) {
    auto train = std::make_shared<Train>(s);
    TrainSystem sys(train, small_primary(s));
    auto specs = two_sites(sys);
    std::vector<double> probe{4.0, -8.0, 2.0, 0.0};
    // repeat so the cached base and weights are exercised too
    for (int pass = 0; pass < 2; ++pass) {
        auto fast = sys.measure(specs, probe);
        auto exact = sys.measure_exact(specs, probe);
        for (size_t i = 0; i < probe.size(); ++i)
            CHECK(fast[i] == doctest::Approx(exact[i]).epsilon(1e-9).scale(exact.back() * 1e-12));
        specs[0].grating.phase += 0.5;
    }
}

}  // namespace

TEST_CASE("superposed window contributions match full propagation, single pass") {
    check_superposition(small_setup());
}

TEST_CASE("superposed window contributions match full propagation, double pass") {
    TrainSetup s = small_setup();
    s.double_pass = true;
    s.as2 = default_as2(s.cfg);
    check_superposition(s);
}

TEST_CASE("the addressed spot is the brightest sample and lies where the target says") {
    TrainSetup s = small_setup(0.0);
    s.aberration = s.compensation;
    Train t(s);
    Field f = t.observe(small_primary(s));
    auto [r, c] = t.sample_of(0);
    double at_spot = patch_intensity(f, r, c, 1), best = 0;
    for (int dr = -3; dr <= 3; ++dr)
        for (int dc = -3; dc <= 3; ++dc) best = std::max(best, std::norm(f.at(r + dr, c + dc)));
    CHECK(at_spot == doctest::Approx(best));
    CHECK(std::abs(f.x(c) - s.target.x0_x) <= 0.5 * f.pitch_x);
}

TEST_CASE("primary-off measurement leaves only the window light") {
    TrainSetup s = small_setup();
    auto train = std::make_shared<Train>(s);
    TrainSystem sys(train, small_primary(s));
    auto specs = two_sites(sys);
    CHECK(sys.measure({}, {4.0}, false)[0] == doctest::Approx(0.0));
    CHECK(sys.measure(specs, {4.0}, false)[0] > 0);
}

TEST_CASE("two-beam oracle optimum cancels the site") {
    TwoBeamSystem sys({{4.0, std::polar(3e-3, 0.8), 0.01, -0.3}});
    SecondaryHologramSpec sp;
    sp.grating.xa_x = 4.0;
    sp.grating.amplitude = sys.optimum_amplitude(4.0);
    sp.grating.phase = sys.optimum_phase(4.0);
    CHECK(sys.measure({sp}, {4.0})[0] < 1e-20);
    CHECK_THROWS_AS(sys.measure({}, {5.0}), ParameterError);
}
