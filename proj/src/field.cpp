#include "dmdx/field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "dmdx/errors.hpp"

namespace dmdx {

const char* plane_name(Plane p) {
    switch (p) {
        case Plane::FP1: return "FP1";
        case Plane::IP1: return "IP1";
        case Plane::FP2: return "FP2";
        case Plane::IP2: return "IP2";
        default: return "custom";
    }
}

Field::Field(int r, int c, double px, double py, Plane pl)
    : rows(r), cols(c), pitch_x(px), pitch_y(py), plane(pl), data(static_cast<size_t>(r) * c) {
    check();
}

void Field::check() const {
    if (rows < 2 || cols < 2) throw ShapeError("field grid must be at least 2x2");
    if (!(pitch_x > 0) || !(pitch_y > 0)) throw ParameterError("field pitch must be positive");
    if (data.size() != static_cast<size_t>(rows) * cols) throw ShapeError("field data size does not match grid");
}

double Field::power() const {
    double s = 0;
    for (const auto& z : data) s += std::norm(z);
    return s * pitch_x * pitch_y;
}

std::vector<double> Field::intensity() const {
    std::vector<double> out(data.size());
    for (size_t i = 0; i < data.size(); ++i) out[i] = std::norm(data[i]);
    return out;
}

namespace {
const char kMagic[4] = {'C', 'F', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw ParameterError("truncated field file");
    return v;
}
}  // namespace

// little-endian hosts only; that is every target we build for
void write_field(const Field& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParameterError("cannot write " + path);
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.rows));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.cols));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.plane));
    put<double>(os, f.pitch_x);
    put<double>(os, f.pitch_y);
    put<double>(os, f.origin_x);
    put<double>(os, f.origin_y);
    for (const auto& z : f.data) {
        put<double>(os, z.real());
        put<double>(os, z.imag());
    }
}

Field read_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParameterError("cannot open " + path);
    char m[4];
    is.read(m, 4);
    if (!is || std::memcmp(m, kMagic, 4) != 0) throw ParameterError(path + ": not a field dump");
    if (get<std::uint32_t>(is) != kVersion) throw ParameterError(path + ": unsupported field dump version");
    Field f;
    f.rows = static_cast<int>(get<std::uint32_t>(is));
    f.cols = static_cast<int>(get<std::uint32_t>(is));
    f.plane = static_cast<Plane>(get<std::uint32_t>(is));
    f.pitch_x = get<double>(is);
    f.pitch_y = get<double>(is);
    f.origin_x = get<double>(is);
    f.origin_y = get<double>(is);
    f.data.resize(static_cast<size_t>(f.rows) * f.cols);
    for (auto& z : f.data) {
        double re = get<double>(is);
        double im = get<double>(is);
        z = cd(re, im);
    }
    f.check();
    return f;
}

void write_field_text(const Field& f, std::ostream& os) {
    os << "# field " << plane_name(f.plane) << ' ' << f.rows << ' ' << f.cols << ' ' << std::setprecision(17)
       << f.pitch_x << ' ' << f.pitch_y << ' ' << f.origin_x << ' ' << f.origin_y << '\n';
    for (int r = 0; r < f.rows; ++r) {
        for (int c = 0; c < f.cols; ++c) {
            if (c) os << ' ';
            os << f.at(r, c).real() << ' ' << f.at(r, c).imag();
        }
        os << '\n';
    }
}

}  // namespace dmdx
