#pragma once

#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "training.hpp"

namespace kanmerge {

struct ArchPreset {
    std::string name;
    Architecture arch;
    std::size_t expected_parameters;
    /// Step size that trains this preset stably on its benchmark.
    double recommended_mu;
};

/// 16 inputs, 70 addends, 3 inner / 25 outer nodes: 5,110 parameters.
inline ArchPreset det4_preset() { return {"det4", {16, {{70, 3}, {1, 25}}}, 5'110, 0.5}; }

/// 25 inputs, 160 addends, 3 inner / 30 outer nodes: 16,800 parameters.
inline ArchPreset det5_preset() { return {"det5", {25, {{160, 3}, {1, 30}}}, 16'800, 0.5}; }

/// 12 inputs, layers of 70 / 30 / 4 operators with 3 / 18 / 22 nodes: 42,960 parameters.
inline ArchPreset tetra_preset() { return {"tetra", {12, {{70, 3}, {30, 18}, {4, 22}}}, 42'960, 0.1}; }

/// Throws when the preset's shape does not give its documented parameter count.
inline const ArchPreset& checked(const ArchPreset& p) {
    if (p.arch.parameter_count() != p.expected_parameters)
        throw InputError("preset " + p.name + " has " + std::to_string(p.arch.parameter_count()) +
                         " parameters, expected " + std::to_string(p.expected_parameters));
    return p;
}

/// Parses a preset name or a custom spec "p:m1/n1,m2/n2,..." (input width,
/// then out_dim/nodes per layer).
inline Architecture parse_architecture(std::string_view text) {
    if (text == "det4") return checked(det4_preset()).arch;
    if (text == "det5") return checked(det5_preset()).arch;
    if (text == "tetra") return checked(tetra_preset()).arch;

    auto number = [&](std::string_view s) {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || v == 0)
            throw InputError("bad number '" + std::string(s) + "' in architecture '" +
                             std::string(text) + "'");
        return v;
    };
    const auto colon = text.find(':');
    if (colon == std::string_view::npos)
        throw InputError("architecture must be det4, det5, tetra or p:m/n,m/n,... (got '" +
                         std::string(text) + "')");
    Architecture arch;
    arch.input_dim = number(text.substr(0, colon));
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = rest.substr(0, comma);
        const auto slash = item.find('/');
        if (slash == std::string_view::npos)
            throw InputError("layer '" + std::string(item) + "' must be out_dim/nodes");
        LayerSpec spec{number(item.substr(0, slash)), number(item.substr(slash + 1))};
        if (spec.node_count < 2) throw InputError("layers need at least 2 nodes per function");
        arch.layers.push_back(spec);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (arch.layers.empty()) throw InputError("architecture has no layers");
    return arch;
}

} // namespace kanmerge
