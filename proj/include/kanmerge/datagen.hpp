#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace kanmerge {

enum class TaskKind { det4, det5, tetra };

inline std::string to_string(TaskKind k) {
    switch (k) {
    case TaskKind::det4: return "det4";
    case TaskKind::det5: return "det5";
    case TaskKind::tetra: return "tetra";
    }
    return "?";
}

inline TaskKind parse_task(const std::string& name) {
    if (name == "det4") return TaskKind::det4;
    if (name == "det5") return TaskKind::det5;
    if (name == "tetra") return TaskKind::tetra;
    throw InputError("unknown task '" + name + "' (expected det4, det5 or tetra)");
}

struct TaskSpec {
    TaskKind kind = TaskKind::det4;
    std::size_t train_count = 100'000;
    std::size_t val_count = 20'000;
    std::uint64_t seed = 1;
    double lo = 0.0;
    double hi = 1.0;
};

/// Determinant of a row-major dim x dim matrix by Gaussian elimination with
/// partial pivoting.
inline double determinant(std::span<const double> matrix, std::size_t dim) {
    detail::require_dim(matrix.size(), dim * dim, "determinant matrix");
    std::vector<double> a(matrix.begin(), matrix.end());
    double det = 1.0;
    for (std::size_t c = 0; c < dim; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < dim; ++r)
            if (std::abs(a[r * dim + c]) > std::abs(a[pivot * dim + c])) pivot = r;
        if (a[pivot * dim + c] == 0.0) return 0.0;
        if (pivot != c) {
            for (std::size_t k = 0; k < dim; ++k) std::swap(a[c * dim + k], a[pivot * dim + k]);
            det = -det;
        }
        const double p = a[c * dim + c];
        det *= p;
        for (std::size_t r = c + 1; r < dim; ++r) {
            const double factor = a[r * dim + c] / p;
            for (std::size_t k = c + 1; k < dim; ++k) a[r * dim + k] -= factor * a[c * dim + k];
        }
    }
    return det;
}

/// Records of random dim x dim matrices (row-major entries, uniform on
/// [lo, hi)) and their determinants.
inline Dataset gen_determinant(std::size_t dim, std::size_t count, std::uint64_t seed, double lo = 0.0,
                               double hi = 1.0) {
    if (dim != 4 && dim != 5) throw InputError("determinant task supports dim 4 or 5");
    if (count < 1) throw InputError("record count must be positive");
    if (!(lo < hi)) throw InputError("value range must satisfy lo < hi");
    Dataset data(dim * dim, 1);
    data.reserve(count);
    Xoshiro256ss rng(derive_seed(seed, 0x444554ULL, dim));
    std::vector<double> m(dim * dim);
    for (std::size_t r = 0; r < count; ++r) {
        for (auto& v : m) v = rng.uniform(lo, hi);
        const double det = determinant(m, dim);
        data.push_back(m, std::span<const double>(&det, 1));
    }
    return data;
}

using Vec3 = std::array<double, 3>;

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) noexcept {
    const Vec3 u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const Vec3 v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const double cx = u[1] * v[2] - u[2] * v[1];
    const double cy = u[2] * v[0] - u[0] * v[2];
    const double cz = u[0] * v[1] - u[1] * v[0];
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

/// Face areas of a tetrahedron; entry i is the face opposite vertex i, built
/// from the remaining vertices in increasing index order.
inline std::array<double, 4> face_areas(const std::array<Vec3, 4>& v) noexcept {
    return {triangle_area(v[1], v[2], v[3]), triangle_area(v[0], v[2], v[3]),
            triangle_area(v[0], v[1], v[3]), triangle_area(v[0], v[1], v[2])};
}

/// Records of 4 random vertices (12 inputs: x,y,z per vertex) and the 4 face
/// areas in face_areas order.
inline Dataset gen_tetrahedra(std::size_t count, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    if (count < 1) throw InputError("record count must be positive");
    if (!(lo < hi)) throw InputError("value range must satisfy lo < hi");
    Dataset data(12, 4);
    data.reserve(count);
    Xoshiro256ss rng(derive_seed(seed, 0x5445545241ULL));
    std::array<Vec3, 4> v;
    std::array<double, 12> x;
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t c = 0; c < 3; ++c) x[i * 3 + c] = v[i][c] = rng.uniform(lo, hi);
        const auto areas = face_areas(v);
        data.push_back(x, areas);
    }
    return data;
}

/// Train and validation sets for a task, from independent streams.
inline std::pair<Dataset, Dataset> generate_task(const TaskSpec& spec) {
    auto make = [&](std::size_t count, std::uint64_t stream) {
        const std::uint64_t s = derive_seed(spec.seed, stream);
        switch (spec.kind) {
        case TaskKind::det4: return gen_determinant(4, count, s, spec.lo, spec.hi);
        case TaskKind::det5: return gen_determinant(5, count, s, spec.lo, spec.hi);
        case TaskKind::tetra: return gen_tetrahedra(count, s, spec.lo, spec.hi);
        }
        throw InputError("unknown task");
    };
    return {make(spec.train_count, 1), make(spec.val_count, 2)};
}

} // namespace kanmerge
