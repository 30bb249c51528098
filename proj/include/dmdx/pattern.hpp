#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dmdx/config.hpp"

namespace dmdx {

// Mirror states for the whole device at simulation resolution.
// Columns [0, partition) are FP1, [partition, cols) are IP1.
struct DmdPattern {
    int rows = 0, cols = 0, partition = 0;
    std::vector<std::uint8_t> mirrors;

    DmdPattern() = default;
    DmdPattern(int r, int c, int part, std::uint8_t fill = 0);
    static DmdPattern blank(const Geometry& g, std::uint8_t fp1_fill = 0, std::uint8_t ip1_fill = 1);

    std::uint8_t& at(int r, int c) { return mirrors[static_cast<size_t>(r) * cols + c]; }
    std::uint8_t at(int r, int c) const { return mirrors[static_cast<size_t>(r) * cols + c]; }
    std::uint8_t ip1(int r, int c) const { return at(r, partition + c); }
    std::uint8_t& ip1(int r, int c) { return at(r, partition + c); }
    int ip1_cols() const { return cols - partition; }

    void check() const;
    void check_against(const Geometry& g) const;
    bool operator==(const DmdPattern& o) const = default;
};

// Binary form: "DMDP", u32 version, u32 rows, u32 cols, u32 partition,
// then rows*cols bits packed MSB-first, row-major, last byte zero padded.
void write_pattern(const DmdPattern& p, const std::string& path);
DmdPattern read_pattern(const std::string& path);
// Text form: header line "DMDPATTERN rows cols partition", then one line of 0/1 per row.
void write_pattern_text(const DmdPattern& p, std::ostream& os);
DmdPattern read_pattern_text(std::istream& is);

}  // namespace dmdx
