#include "dmdx/optics.hpp"

#include <cmath>
#include <random>

#include "dmdx/errors.hpp"
#include "dmdx/fft.hpp"
#include "dmdx/rng.hpp"

namespace dmdx {

Plane next_plane(Plane p, Direction dir) {
    if (dir == Direction::Forward) {
        switch (p) {
            case Plane::FP1: return Plane::IP1;
            case Plane::IP1: return Plane::FP2;
            case Plane::FP2: return Plane::IP2;
            default: return Plane::Custom;
        }
    }
    switch (p) {
        case Plane::IP1: return Plane::FP1;
        case Plane::FP2: return Plane::IP1;
        case Plane::IP2: return Plane::FP2;
        default: return Plane::Custom;
    }
}

Field gaussian_illumination(const OpticalConfig& cfg, int rows, int cols) {
    Geometry g = Geometry::from(cfg);
    if (rows != g.rows || cols != g.fp1)
        throw ConfigError("illumination grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " does not match the FP1 region " + std::to_string(g.rows) + "x" + std::to_string(g.fp1));
    Field f(rows, cols, g.pitch, g.pitch, Plane::FP1);
    const double w2 = cfg.illumination_waist * cfg.illumination_waist;
    for (int r = 0; r < rows; ++r) {
        double y = f.y(r);
        for (int c = 0; c < cols; ++c) {
            double x = f.x(c);
            f.at(r, c) = std::exp(-(x * x + y * y) / w2);
        }
    }
    return f;
}

Field apply_mask(const Field& field, const DmdPattern& pattern, Region region, const MirrorAnchor& anchor) {
    pattern.check();
    Field out = field;
    if (region == Region::FP1) {
        if (field.rows != pattern.rows || field.cols != pattern.partition)
            throw ShapeError("FP1 mask and field are not co-sampled");
        for (int r = 0; r < field.rows; ++r)
            for (int c = 0; c < field.cols; ++c)
                if (!pattern.at(r, c)) out.at(r, c) = 0.0;
        return out;
    }
    // IP1: each image sample takes the state of the mirror it lands on; off the mirror array is dark
    if (!(anchor.pitch > 0)) throw ParameterError("IP1 mask needs the mirror pitch");
    const int nr = pattern.rows, nc = pattern.ip1_cols();
    std::vector<int> col_of(static_cast<size_t>(field.cols)), row_of(static_cast<size_t>(field.rows));
    for (int c = 0; c < field.cols; ++c)
        col_of[static_cast<size_t>(c)] =
            static_cast<int>(std::floor((field.x(c) - anchor.x0) / anchor.pitch + 0.5)) + nc / 2;
    for (int r = 0; r < field.rows; ++r)
        row_of[static_cast<size_t>(r)] =
            static_cast<int>(std::floor((field.y(r) - anchor.y0) / anchor.pitch + 0.5)) + nr / 2;
    for (int r = 0; r < field.rows; ++r) {
        int mr = row_of[static_cast<size_t>(r)];
        for (int c = 0; c < field.cols; ++c) {
            int mc = col_of[static_cast<size_t>(c)];
            bool on = mr >= 0 && mr < nr && mc >= 0 && mc < nc && pattern.ip1(mr, mc);
            if (!on) out.at(r, c) = 0.0;
        }
    }
    return out;
}

Field apply_phase(const Field& field, const AberrationMap& map) {
    if (map.phase.rows != field.rows || map.phase.cols != field.cols)
        throw ShapeError("aberration map is not co-sampled with the field");
    Field out = field;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= std::polar(1.0, map.phase.v[i]);
    return out;
}

Field lens_fourier(const Field& field, double wavelength, double focal, Direction dir) {
    field.check();
    Field out = field;
    const double lf = wavelength * focal;
    out.pitch_x = lf / (field.cols * field.pitch_x);
    out.pitch_y = lf / (field.rows * field.pitch_y);
    out.origin_x = out.origin_y = 0;
    out.plane = next_plane(field.plane, dir);
    centered_dft(out.data, out.rows, out.cols, dir == Direction::Forward ? -1 : +1);
    // unitary DFT keeps sum |E|^2; rescale so sum |E|^2 * area is kept instead
    const double s = std::sqrt(field.pitch_x * field.pitch_y / (out.pitch_x * out.pitch_y));
    for (auto& z : out.data) z *= s;
    return out;
}

Field lens_fourier(const Field& field, const OpticalConfig& cfg, Direction dir) {
    return lens_fourier(field, cfg.wavelength, cfg.focal_length_f, dir);
}

Field fourier_aperture(const Field& field, double radius, StopShape shape) {
    if (!(radius > 0)) throw ParameterError("aperture radius must be positive");
    Field out = field;
    for (int r = 0; r < out.rows; ++r) {
        double y = out.y(r) - out.origin_y;
        for (int c = 0; c < out.cols; ++c) {
            double x = out.x(c) - out.origin_x;
            bool in = shape == StopShape::Circle ? (x * x + y * y <= radius * radius)
                                                 : (std::abs(x) <= radius && std::abs(y) <= radius);
            if (!in) out.at(r, c) = 0.0;
        }
    }
    return out;
}

Field relay_image(const Field& ip1, const OpticalConfig& cfg, const AberrationMap* aberration,
                  const std::optional<Stop>& stop) {
    const double fa = cfg.focal_length_f;
    const double fb = cfg.relay_magnification * fa;
    Field fp2 = lens_fourier(ip1, cfg.wavelength, fa, Direction::Forward);
    if (stop) fp2 = fourier_aperture(fp2, stop->radius, stop->shape);
    if (aberration) fp2 = apply_phase(fp2, *aberration);
    Field out = lens_fourier(fp2, cfg.wavelength, fb, Direction::Forward);
    out.plane = Plane::IP2;
    return out;
}

Field embed(const Field& f, int n) {
    if (n < f.rows || n < f.cols) throw ShapeError("embed target smaller than field");
    Field out(n, n, f.pitch_x, f.pitch_y, f.plane);
    out.origin_x = f.origin_x;
    out.origin_y = f.origin_y;
    const int orow = n / 2 - f.rows / 2, ocol = n / 2 - f.cols / 2;
    for (int r = 0; r < f.rows; ++r)
        for (int c = 0; c < f.cols; ++c) out.at(orow + r, ocol + c) = f.at(r, c);
    return out;
}

Field crop(const Field& f, int rows, int cols) {
    if (rows > f.rows || cols > f.cols) throw ShapeError("crop larger than field");
    Field out(rows, cols, f.pitch_x, f.pitch_y, f.plane);
    out.origin_x = f.origin_x;
    out.origin_y = f.origin_y;
    const int orow = f.rows / 2 - rows / 2, ocol = f.cols / 2 - cols / 2;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out.at(r, c) = f.at(orow + r, ocol + c);
    return out;
}

// ---- aberrations

AberrationMap zero_aberration(int rows, int cols) { return {RealGrid(rows, cols, 0.0), "none"}; }

AberrationMap add_maps(const AberrationMap& a, const AberrationMap& b) {
    if (a.phase.rows != b.phase.rows || a.phase.cols != b.phase.cols) throw ShapeError("aberration maps differ in shape");
    AberrationMap out = a;
    for (size_t i = 0; i < out.phase.v.size(); ++i) out.phase.v[i] += b.phase.v[i];
    out.description = a.description + " + " + b.description;
    return out;
}

AberrationMap synth_aberration(int rows, int cols, double pitch, const AberrationRecipe& rc) {
    if (!(rc.radius > 0) || !(rc.rms >= 0) || !std::isfinite(rc.rms)) throw ParameterError("bad aberration recipe");
    std::vector<double> k = rc.coefficients;
    if (k.empty()) {
        std::mt19937_64 g(rc.seed);
        for (int i = 0; i < 5; ++i) k.push_back(normal01(g));
    }
    if (k.size() != 5) throw ParameterError("aberration recipe needs exactly 5 coefficients");
    AberrationMap m{RealGrid(rows, cols), ""};
    double sum = 0, sum2 = 0;
    long count = 0;
    const double R = rc.radius;
    for (int r = 0; r < rows; ++r) {
        double y = (r - rows / 2) * pitch / R;
        for (int c = 0; c < cols; ++c) {
            double x = (c - cols / 2) * pitch / R;
            double p2 = x * x + y * y;
            double v = k[0] * (x * x - y * y) + k[1] * 2 * x * y + k[2] * (3 * p2 - 2) * x +
                       k[3] * (3 * p2 - 2) * y + k[4] * (6 * p2 * p2 - 6 * p2 + 1);
            m.phase.at(r, c) = v;
            if (p2 <= 1) {
                sum += v;
                ++count;
            }
        }
    }
    if (count < 16) throw ParameterError("aberration disk covers too few samples");
    double mean = sum / count;
    for (int r = 0; r < rows; ++r) {
        double y = (r - rows / 2) * pitch / R;
        for (int c = 0; c < cols; ++c) {
            double x = (c - cols / 2) * pitch / R;
            if (x * x + y * y <= 1) {
                double d = m.phase.at(r, c) - mean;
                sum2 += d * d;
            }
        }
    }
    double scale = sum2 > 0 ? rc.rms / std::sqrt(sum2 / count) : 0.0;
    for (auto& v : m.phase.v) v = (v - mean) * scale;
    char buf[160];
    std::snprintf(buf, sizeof buf, "astig %.3f %.3f coma %.3f %.3f sph %.3f, rms %.4f rad over r=%.3g m", k[0], k[1],
                  k[2], k[3], k[4], rc.rms, R);
    m.description = buf;
    return m;
}

}  // namespace dmdx
