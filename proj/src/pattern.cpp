#include "dmdx/pattern.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dmdx/errors.hpp"

namespace dmdx {

DmdPattern::DmdPattern(int r, int c, int part, std::uint8_t fill)
    : rows(r), cols(c), partition(part), mirrors(static_cast<size_t>(r) * c, fill) {
    check();
}

DmdPattern DmdPattern::blank(const Geometry& g, std::uint8_t fp1_fill, std::uint8_t ip1_fill) {
    DmdPattern p(g.rows, g.fp1 + g.ip1, g.fp1, 0);
    for (int r = 0; r < p.rows; ++r)
        for (int c = 0; c < p.cols; ++c) p.at(r, c) = c < p.partition ? fp1_fill : ip1_fill;
    return p;
}

void DmdPattern::check() const {
    if (rows <= 0 || cols <= 0 || partition < 0 || partition > cols) throw ShapeError("bad pattern shape");
    if (mirrors.size() != static_cast<size_t>(rows) * cols) throw ShapeError("pattern size does not match shape");
    for (auto m : mirrors)
        if (m > 1) throw ParameterError("pattern entries must be 0 or 1");
}

void DmdPattern::check_against(const Geometry& g) const {
    check();
    if (rows != g.rows || cols != g.fp1 + g.ip1 || partition != g.fp1)
        throw ShapeError("pattern shape does not match the configured DMD");
}

namespace {
constexpr std::uint32_t kVersion = 1;
void put32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}
std::uint32_t get32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ParameterError("truncated pattern file");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void write_pattern(const DmdPattern& p, const std::string& path) {
    p.check();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParameterError("cannot write " + path);
    os.write("DMDP", 4);
    put32(os, kVersion);
    put32(os, static_cast<std::uint32_t>(p.rows));
    put32(os, static_cast<std::uint32_t>(p.cols));
    put32(os, static_cast<std::uint32_t>(p.partition));
    std::vector<unsigned char> bytes((p.mirrors.size() + 7) / 8, 0);
    for (size_t i = 0; i < p.mirrors.size(); ++i)
        if (p.mirrors[i]) bytes[i / 8] |= static_cast<unsigned char>(0x80u >> (i % 8));
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

DmdPattern read_pattern(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParameterError("cannot open " + path);
    char m[4];
    is.read(m, 4);
    if (!is || std::memcmp(m, "DMDP", 4) != 0) throw ParameterError(path + ": not a pattern file");
    if (get32(is) != kVersion) throw ParameterError(path + ": unsupported pattern version");
    DmdPattern p;
    p.rows = static_cast<int>(get32(is));
    p.cols = static_cast<int>(get32(is));
    p.partition = static_cast<int>(get32(is));
    p.mirrors.assign(static_cast<size_t>(p.rows) * p.cols, 0);
    std::vector<unsigned char> bytes((p.mirrors.size() + 7) / 8);
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!is) throw ParameterError(path + ": truncated payload");
    for (size_t i = 0; i < p.mirrors.size(); ++i) p.mirrors[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
    p.check();
    return p;
}

void write_pattern_text(const DmdPattern& p, std::ostream& os) {
    os << "DMDPATTERN " << p.rows << ' ' << p.cols << ' ' << p.partition << '\n';
    std::string line(static_cast<size_t>(p.cols), '0');
    for (int r = 0; r < p.rows; ++r) {
        for (int c = 0; c < p.cols; ++c) line[static_cast<size_t>(c)] = p.at(r, c) ? '1' : '0';
        os << line << '\n';
    }
}

DmdPattern read_pattern_text(std::istream& is) {
    std::string tag;
    DmdPattern p;
    is >> tag >> p.rows >> p.cols >> p.partition;
    if (!is || tag != "DMDPATTERN") throw ParameterError("not a text pattern");
    if (p.rows <= 0 || p.cols <= 0) throw ShapeError("bad pattern shape");
    p.mirrors.assign(static_cast<size_t>(p.rows) * p.cols, 0);
    std::string line;
    for (int r = 0; r < p.rows; ++r) {
        is >> line;
        if (!is || static_cast<int>(line.size()) != p.cols) throw ParameterError("text pattern row malformed");
        for (int c = 0; c < p.cols; ++c) {
            char ch = line[static_cast<size_t>(c)];
            if (ch != '0' && ch != '1') throw ParameterError("text pattern entries must be 0 or 1");
            p.at(r, c) = ch == '1';
        }
    }
    p.check();
    return p;
}

}  // namespace dmdx
