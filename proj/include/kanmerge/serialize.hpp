#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "model.hpp"

namespace kanmerge {

// Model file layout, all integers and reals little-endian:
//
//   "KANM"                 4 bytes
//   version                u32 (= kModelFormatVersion)
//   layer_count            u32
//   per layer:
//     m, n                 u32, u32
//     per column j < n:    node_count u32, y_min f64, y_max f64
//     node values          f64 in (i, j, k) order
inline constexpr std::uint32_t kModelFormatVersion = 1;

inline void write_model(std::ostream& os, const KanModel& model) {
    os.write("KANM", 4);
    detail::put_u32(os, kModelFormatVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(model.layer_count()));
    for (const PlfTable& layer : model.layers()) {
        detail::put_u32(os, static_cast<std::uint32_t>(layer.out_dim()));
        detail::put_u32(os, static_cast<std::uint32_t>(layer.in_dim()));
        for (const Grid& g : layer.grids()) {
            detail::put_u32(os, static_cast<std::uint32_t>(g.node_count()));
            detail::put_f64(os, g.y_min());
            detail::put_f64(os, g.y_max());
        }
        for (double v : layer.values()) detail::put_f64(os, v);
    }
}

inline KanModel read_model(std::istream& is) {
    detail::expect_magic(is, "KANM");
    const auto version = detail::get_u32(is);
    if (version != kModelFormatVersion)
        throw DataError("unsupported model format version " + std::to_string(version));
    const auto depth = detail::get_u32(is);
    if (depth == 0) throw DataError("model file declares zero layers");
    std::vector<PlfTable> layers;
    layers.reserve(depth);
    for (std::uint32_t l = 0; l < depth; ++l) {
        const auto m = detail::get_u32(is);
        const auto n = detail::get_u32(is);
        if (m == 0 || n == 0) throw DataError("layer " + std::to_string(l) + " has an empty shape");
        std::vector<Grid> grids;
        grids.reserve(n);
        for (std::uint32_t j = 0; j < n; ++j) {
            const auto nodes = detail::get_u32(is);
            const double lo = detail::get_f64(is);
            const double hi = detail::get_f64(is);
            try {
                grids.emplace_back(lo, hi, nodes);
            } catch (const InputError& e) {
                throw DataError("layer " + std::to_string(l) + " column " + std::to_string(j) + ": " +
                                e.what());
            }
        }
        PlfTable table(m, std::move(grids));
        for (double& v : table.values()) v = detail::get_f64(is);
        layers.push_back(std::move(table));
    }
    try {
        return KanModel(std::move(layers));
    } catch (const Error& e) {
        throw DataError(e.what());
    }
}

inline void save_model(const std::string& path, const KanModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    write_model(os, model);
    if (!os) throw DataError("write to '" + path + "' failed");
}

inline KanModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    try {
        return read_model(is);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

} // namespace kanmerge
