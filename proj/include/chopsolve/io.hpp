#pragma once

// Artifact writers: PGM images, raw vector files, iteration-history CSV.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "chopsolve/errors.hpp"
#include "chopsolve/solvers.hpp"

namespace chopsolve {

/// Binary P5 PGM, linear min-max scaling to 0..255. Non-finite pixels map to
/// 0 and are excluded from the range; a constant image maps to 0.
inline void write_pgm(std::ostream& os, std::span<const double> img, std::size_t rows, std::size_t cols) {
    if (img.size() != rows * cols) throw DimensionError("write_pgm: image size does not match rows*cols");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : img)
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    std::vector<unsigned char> px(img.size(), 0);
    if (hi > lo)
        for (std::size_t i = 0; i < img.size(); ++i)
            if (std::isfinite(img[i])) px[i] = static_cast<unsigned char>(std::lround((img[i] - lo) / (hi - lo) * 255.0));
    os << "P5\n" << cols << ' ' << rows << "\n255\n";
    os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

inline void save_pgm(const std::string& path, std::span<const double> img, std::size_t rows, std::size_t cols) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_pgm(os, img, rows, cols);
}

// Vector file: 8-byte magic "CHOPVEC1", uint64 element count, then IEEE
// binary64 values. All integers and values little-endian.
inline constexpr std::array<char, 8> kVectorMagic{'C', 'H', 'O', 'P', 'V', 'E', 'C', '1'};

namespace detail {

inline void put_le64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os.write(b, 8);
}

inline std::uint64_t get_le64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("vector file: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
}

}  // namespace detail

inline void write_vector(std::ostream& os, std::span<const double> v) {
    os.write(kVectorMagic.data(), kVectorMagic.size());
    detail::put_le64(os, v.size());
    for (double x : v) detail::put_le64(os, std::bit_cast<std::uint64_t>(x));
}

inline std::vector<double> read_vector(std::istream& is) {
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kVectorMagic) throw IoError("vector file: bad magic");
    const auto n = detail::get_le64(is);
    std::vector<double> v;
    v.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) v.push_back(std::bit_cast<double>(detail::get_le64(is)));
    return v;
}

inline void save_vector(const std::string& path, std::span<const double> v) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_vector(os, v);
}

inline std::vector<double> load_vector(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    return read_vector(is);
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// CSV with header `iter,rel_error,residual_norm,finite`. rel_error is empty
/// when the error was not tracked; finite is 1 or 0.
inline void write_history_csv(std::ostream& os, std::span<const IterationRecord> history) {
    os << "iter,rel_error,residual_norm,finite\n";
    for (const auto& rec : history) {
        os << rec.k << ',';
        if (rec.rel_error) os << format_real(*rec.rel_error);
        os << ',' << format_real(rec.residual_norm) << ',' << (rec.finite ? 1 : 0) << '\n';
    }
}

inline void save_history_csv(const std::string& path, std::span<const IterationRecord> history) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_history_csv(os, history);
}

}  // namespace chopsolve
