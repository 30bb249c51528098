#include "dmdx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dmdx/errors.hpp"

namespace dmdx {

double to_db(double ratio) { return 10.0 * std::log10(ratio); }

double patch_intensity(const Field& f, int row, int col, int patch) {
    const int h = patch / 2;
    double s = 0;
    for (int dr = -h; dr <= h; ++dr)
        for (int dc = -h; dc <= h; ++dc) {
            int r = (row + dr + f.rows) % f.rows, c = (col + dc + f.cols) % f.cols;
            s += std::norm(f.at(r, c));
        }
    return s / (patch * patch);
}

namespace {

double bilinear(const Field& f, double r, double c) {
    int r0 = static_cast<int>(std::floor(r)), c0 = static_cast<int>(std::floor(c));
    double fr = r - r0, fc = c - c0;
    auto I = [&](int rr, int cc) {
        rr = ((rr % f.rows) + f.rows) % f.rows;
        cc = ((cc % f.cols) + f.cols) % f.cols;
        return std::norm(f.at(rr, cc));
    };
    // exact lattice points skip the blend so axis-aligned cuts are exact
    if (fr == 0 && fc == 0) return I(r0, c0);
    return (1 - fr) * (1 - fc) * I(r0, c0) + (1 - fr) * fc * I(r0, c0 + 1) + fr * (1 - fc) * I(r0 + 1, c0) +
           fr * fc * I(r0 + 1, c0 + 1);
}

}  // namespace

CrosstalkProfile extract_profile_at(const Field& f, int row, int col, double angle, int patch, double floor_db) {
    if (patch < 1 || patch % 2 == 0) throw ParameterError("patch must be an odd count");
    CrosstalkProfile p;
    p.plane = f.plane;
    p.peak_row = row;
    p.peak_col = col;
    double ca = std::cos(angle), sa = std::sin(angle);
    // snap tiny trig residue so angle 0 and pi land on the lattice
    if (std::abs(ca) < 1e-12) ca = 0;
    if (std::abs(sa) < 1e-12) sa = 0;
    if (std::abs(std::abs(ca) - 1) < 1e-12) ca = ca > 0 ? 1 : -1;
    if (std::abs(std::abs(sa) - 1) < 1e-12) sa = sa > 0 ? 1 : -1;
    const int half = f.cols / 2;
    const int h = patch / 2;
    double ratio = f.pitch_x / f.pitch_y;
    for (int k = -half; k < half; ++k) {
        double c = col + k * ca, r = row + k * sa * ratio;
        double s = 0;
        for (int dr = -h; dr <= h; ++dr)
            for (int dc = -h; dc <= h; ++dc) s += bilinear(f, r + dr, c + dc);
        p.positions.push_back(k * f.pitch_x);
        p.intensities.push_back(s / (patch * patch));
    }
    double mx = *std::max_element(p.intensities.begin(), p.intensities.end());
    if (!(mx > 0)) throw MeasurementError("no peak: field is zero along the cut");
    for (auto& v : p.intensities) v /= mx;
    apply_floor(p, floor_db);
    return p;
}

CrosstalkProfile extract_profile(const Field& f, double angle, int patch, double floor_db) {
    size_t best = 0;
    double mx = -1;
    for (size_t i = 0; i < f.data.size(); ++i) {
        double v = std::norm(f.data[i]);
        if (v > mx) {
            mx = v;
            best = i;
        }
    }
    if (!(mx > 0)) throw MeasurementError("no peak: field is zero");
    return extract_profile_at(f, static_cast<int>(best / f.cols), static_cast<int>(best % f.cols), angle, patch,
                              floor_db);
}

void apply_floor(CrosstalkProfile& p, double floor_db) {
    const double fl = std::pow(10.0, floor_db / 10.0);
    for (auto& v : p.intensities) v = std::max(v, fl);
    p.floor_db = floor_db;
}

double relative_crosstalk(const CrosstalkProfile& p, double x) {
    const auto& xs = p.positions;
    if (xs.empty() || x < xs.front() || x > xs.back()) throw ParameterError("location outside the profile");
    auto it = std::lower_bound(xs.begin(), xs.end(), x);
    size_t i = static_cast<size_t>(it - xs.begin());
    if (xs[i] == x) return to_db(p.intensities[i]);
    double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return to_db((1 - t) * p.intensities[i - 1] + t * p.intensities[i]);
}

WaistFit fit_waist(const CrosstalkProfile& p) {
    // log-quadratic least squares over I >= 0.1: ln I = a + b x + c x^2
    size_t pk = static_cast<size_t>(std::max_element(p.intensities.begin(), p.intensities.end()) - p.intensities.begin());
    double S[5] = {0, 0, 0, 0, 0}, T[3] = {0, 0, 0};
    int n = 0;
    for (size_t i = 0; i < p.positions.size(); ++i) {
        if (p.intensities[i] < 0.1) continue;
        double x = p.positions[i] - p.positions[pk], y = std::log(p.intensities[i]);
        double xp = 1;
        for (int k = 0; k < 5; ++k) {
            S[k] += xp;
            if (k < 3) T[k] += xp * y;
            xp *= x;
        }
        ++n;
    }
    if (n < 5) throw MeasurementError("fewer than 5 samples in the central lobe");
    // 3x3 normal equations, Cramer's rule is fine at this size
    double A[3][3] = {{S[0], S[1], S[2]}, {S[1], S[2], S[3]}, {S[2], S[3], S[4]}};
    auto det3 = [](double m[3][3]) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    double D = det3(A);
    double coef[3];
    for (int j = 0; j < 3; ++j) {
        double M[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) M[r][c] = c == j ? T[r] : A[r][c];
        coef[j] = det3(M) / D;
    }
    WaistFit out;
    if (!(coef[2] < 0)) {
        out.flagged = true;
        out.residual = 1;
        return out;
    }
    out.waist = std::sqrt(-2.0 / coef[2]);
    // relative residual where the fitted model is within 20 dB of its peak
    double x0 = -coef[1] / (2 * coef[2]);
    double amp = std::exp(coef[0] - coef[1] * coef[1] / (4 * coef[2]));
    double acc = 0;
    int m = 0;
    for (size_t i = 0; i < p.positions.size(); ++i) {
        double x = p.positions[i] - p.positions[pk] - x0;
        double model = amp * std::exp(-2 * x * x / (out.waist * out.waist));
        if (model < 0.01 * amp) continue;
        double d = (p.intensities[i] - model) / model;
        acc += d * d;
        ++m;
    }
    out.residual = std::sqrt(acc / m);
    out.flagged = out.residual > 0.10;
    return out;
}

std::optional<double> effective_aperture(const CrosstalkProfile& p, double threshold_db) {
    const double th = std::pow(10.0, threshold_db / 10.0);
    size_t pk = static_cast<size_t>(std::max_element(p.intensities.begin(), p.intensities.end()) - p.intensities.begin());
    double reach = 0;
    // right side
    size_t n = p.intensities.size();
    for (size_t i = n; i-- > pk;) {
        if (p.intensities[i] >= th) {
            if (i + 1 >= n) return std::nullopt;
            double a = p.intensities[i], b = p.intensities[i + 1];
            double t = (a - th) / (a - b);
            reach = std::max(reach, p.positions[i] + t * (p.positions[i + 1] - p.positions[i]) - p.positions[pk]);
            break;
        }
    }
    for (size_t i = 0; i <= pk; ++i) {
        if (p.intensities[i] >= th) {
            if (i == 0) return std::nullopt;
            double a = p.intensities[i], b = p.intensities[i - 1];
            double t = (a - th) / (a - b);
            reach = std::max(reach, p.positions[pk] - (p.positions[i] - t * (p.positions[i] - p.positions[i - 1])));
            break;
        }
    }
    return 2 * reach;
}

std::string profile_table(const CrosstalkProfile& p, double waist) {
    std::string out = "position_w\tI_X_dB\n";
    char buf[64];
    for (size_t i = 0; i < p.positions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.3f\t%.2f\n", p.positions[i] / waist, to_db(p.intensities[i]));
        out += buf;
    }
    return out;
}

}  // namespace dmdx
