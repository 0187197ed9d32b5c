#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace kanmerge {

/// Flat record store: N rows of (p inputs, q targets).
class Dataset {
public:
    Dataset(std::size_t input_dim, std::size_t output_dim)
        : input_dim_(input_dim), output_dim_(output_dim) {
        if (input_dim == 0 || output_dim == 0) throw InputError("dataset dims must be positive");
    }

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept { return output_dim_; }
    std::size_t width() const noexcept { return input_dim_ + output_dim_; }
    std::size_t size() const noexcept { return data_.size() / width(); }
    bool empty() const noexcept { return data_.empty(); }

    void reserve(std::size_t records) { data_.reserve(records * width()); }

    void push_back(std::span<const double> x, std::span<const double> z) {
        detail::require_dim(x.size(), input_dim_, "record input");
        detail::require_dim(z.size(), output_dim_, "record target");
        for (double v : x)
            if (!std::isfinite(v)) throw InputError("non-finite record input");
        for (double v : z)
            if (!std::isfinite(v)) throw InputError("non-finite record target");
        data_.insert(data_.end(), x.begin(), x.end());
        data_.insert(data_.end(), z.begin(), z.end());
    }

    std::span<const double> input(std::size_t r) const noexcept {
        return {data_.data() + r * width(), input_dim_};
    }
    std::span<const double> target(std::size_t r) const noexcept {
        return {data_.data() + r * width() + input_dim_, output_dim_};
    }

    /// Column `c` of the targets.
    std::vector<double> target_column(std::size_t c) const {
        std::vector<double> out(size());
        for (std::size_t r = 0; r < size(); ++r) out[r] = target(r)[c];
        return out;
    }

    std::span<const double> raw() const noexcept { return data_; }

    /// FNV-1a over dims and the little-endian bytes of every value.
    std::uint64_t fingerprint() const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](std::uint64_t w) {
            for (int b = 0; b < 8; ++b) {
                h ^= (w >> (8 * b)) & 0xFF;
                h *= 0x100000001b3ULL;
            }
        };
        mix(input_dim_);
        mix(output_dim_);
        for (double v : data_) mix(std::bit_cast<std::uint64_t>(v));
        return h;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::size_t input_dim_;
    std::size_t output_dim_;
    std::vector<double> data_;
};

/// Per-target-column [min, max].
struct TargetRange {
    double lo;
    double hi;
};

inline TargetRange target_range(const Dataset& data, std::size_t column = 0) {
    if (data.empty()) throw InputError("empty dataset has no target range");
    TargetRange r{data.target(0)[column], data.target(0)[column]};
    for (std::size_t i = 1; i < data.size(); ++i) {
        const double v = data.target(i)[column];
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
    }
    return r;
}

/// Range over all target columns widened by `margin` of its span on each side.
inline TargetRange padded_target_range(const Dataset& data, double margin = 0.05) {
    TargetRange r = target_range(data, 0);
    for (std::size_t c = 1; c < data.output_dim(); ++c) {
        TargetRange rc = target_range(data, c);
        r.lo = std::min(r.lo, rc.lo);
        r.hi = std::max(r.hi, rc.hi);
    }
    double pad = (r.hi - r.lo) * margin;
    if (pad == 0.0) pad = std::max(1.0, std::abs(r.lo)) * margin;
    return {r.lo - pad, r.hi + pad};
}

// ---------------------------------------------------------------------------
// CSV: header x1..xp,z1..zq; values printed with 17 significant digits.

inline std::string format_real(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, end);
}

inline std::string csv_header(std::size_t p, std::size_t q) {
    std::string h;
    for (std::size_t i = 1; i <= p; ++i) h += (i > 1 ? ",x" : "x") + std::to_string(i);
    for (std::size_t i = 1; i <= q; ++i) h += ",z" + std::to_string(i);
    return h;
}

inline void write_csv(std::ostream& os, const Dataset& data) {
    os << csv_header(data.input_dim(), data.output_dim()) << '\n';
    for (std::size_t r = 0; r < data.size(); ++r) {
        auto x = data.input(r);
        auto z = data.target(r);
        std::string line;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (i) line += ',';
            line += format_real(x[i]);
        }
        for (double v : z) {
            line += ',';
            line += format_real(v);
        }
        os << line << '\n';
    }
}

inline void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    write_csv(os, data);
    if (!os) throw DataError("write to '" + path + "' failed");
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
}

inline bool parse_column_name(std::string_view name, char prefix, std::size_t index) {
    return name == std::string(1, prefix) + std::to_string(index);
}

} // namespace detail

/// Parses a CSV dataset. When `expect_p`/`expect_q` are non-zero the header
/// must declare exactly those dimensions.
inline Dataset read_csv(std::istream& is, std::size_t expect_p = 0, std::size_t expect_q = 0) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("missing header", 1);
    auto header = detail::split_commas(detail::trim(line));
    std::size_t p = 0;
    while (p < header.size() && detail::parse_column_name(detail::trim(header[p]), 'x', p + 1)) ++p;
    std::size_t q = 0;
    while (p + q < header.size() && detail::parse_column_name(detail::trim(header[p + q]), 'z', q + 1))
        ++q;
    if (p == 0 || q == 0 || p + q != header.size())
        throw DataError("malformed header, expected x1..xp,z1..zq", 1);
    if ((expect_p && p != expect_p) || (expect_q && q != expect_q))
        throw DataError("header declares " + std::to_string(p) + " inputs and " + std::to_string(q) +
                            " targets, expected " + std::to_string(expect_p) + " and " +
                            std::to_string(expect_q),
                        1);

    Dataset data(p, q);
    std::vector<double> row(p + q);
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        auto trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        auto fields = detail::split_commas(trimmed);
        if (fields.size() != p + q)
            throw DataError("expected " + std::to_string(p + q) + " fields, got " +
                                std::to_string(fields.size()),
                            line_no);
        for (std::size_t c = 0; c < fields.size(); ++c) {
            auto f = detail::trim(fields[c]);
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[c]);
            if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(row[c]))
                throw DataError("field " + std::to_string(c + 1) + " is not a finite number: '" +
                                    std::string(f) + "'",
                                line_no);
        }
        data.push_back(std::span<const double>(row).first(p), std::span<const double>(row).subspan(p));
    }
    if (data.empty()) throw DataError("dataset has no records", line_no);
    return data;
}

inline Dataset load_dataset(const std::string& path, std::size_t expect_p = 0,
                            std::size_t expect_q = 0) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    try {
        return read_csv(is, expect_p, expect_q);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what(), e.line());
    }
}

// ---------------------------------------------------------------------------
// Binary sibling: "KAND", u32 version, u64 p, u64 q, u64 N, then N*(p+q)
// little-endian f64.

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("unexpected end of file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
    char got[4];
    if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0)
        throw DataError(std::string("bad magic, expected '") + magic + "'");
}

} // namespace detail

inline void write_binary(std::ostream& os, const Dataset& data) {
    os.write("KAND", 4);
    detail::put_u32(os, kDatasetFormatVersion);
    detail::put_u64(os, data.input_dim());
    detail::put_u64(os, data.output_dim());
    detail::put_u64(os, data.size());
    for (double v : data.raw()) detail::put_f64(os, v);
}

inline Dataset read_binary(std::istream& is) {
    detail::expect_magic(is, "KAND");
    const auto version = detail::get_u32(is);
    if (version != kDatasetFormatVersion)
        throw DataError("unsupported dataset format version " + std::to_string(version));
    const auto p = detail::get_u64(is);
    const auto q = detail::get_u64(is);
    const auto n = detail::get_u64(is);
    if (p == 0 || q == 0 || n == 0) throw DataError("binary dataset declares empty dimensions");
    Dataset data(p, q);
    data.reserve(n);
    std::vector<double> row(p + q);
    for (std::uint64_t r = 0; r < n; ++r) {
        for (auto& v : row) v = detail::get_f64(is);
        data.push_back(std::span<const double>(row).first(p), std::span<const double>(row).subspan(p));
    }
    return data;
}

inline void save_dataset_binary(const std::string& path, const Dataset& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    write_binary(os, data);
    if (!os) throw DataError("write to '" + path + "' failed");
}

inline Dataset load_dataset_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    return read_binary(is);
}

} // namespace kanmerge
