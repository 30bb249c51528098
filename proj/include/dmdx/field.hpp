#pragma once
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dmdx {

using cd = std::complex<double>;

enum class Plane : std::uint32_t { FP1 = 0, IP1 = 1, FP2 = 2, IP2 = 3, Custom = 4 };
const char* plane_name(Plane p);

// Row-major 2-D grid of complex amplitude. Sample (r, c) sits at
// origin + ((c - cols/2) * pitch_x, (r - rows/2) * pitch_y).
struct Field {
    int rows = 0, cols = 0;
    double pitch_x = 1, pitch_y = 1;
    double origin_x = 0, origin_y = 0;
    Plane plane = Plane::Custom;
    std::vector<cd> data;

    Field() = default;
    Field(int r, int c, double px, double py, Plane pl);

    cd& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    const cd& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double x(int c) const { return origin_x + (c - cols / 2) * pitch_x; }
    double y(int r) const { return origin_y + (r - rows / 2) * pitch_y; }

    // sum |E|^2 * pixel area
    double power() const;
    std::vector<double> intensity() const;
    void check() const;  // invariants, throws ShapeError / ParameterError
};

// Real-valued companion grid (phase maps, continuous holograms).
struct RealGrid {
    int rows = 0, cols = 0;
    std::vector<double> v;
    RealGrid() = default;
    RealGrid(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}
    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

// Field dump: see README ("Field dump format").
void write_field(const Field& f, const std::string& path);
Field read_field(const std::string& path);
void write_field_text(const Field& f, std::ostream& os);

}  // namespace dmdx
