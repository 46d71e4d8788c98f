#pragma once

#include <hmfem/geometry.hpp>

#include <random>
#include <vector>

namespace testing_support {

// n x n squares on [0,1]^2, each cut by its (0,0)-(1,1) diagonal.
inline hmfem::Mesh structured_square(int n)
{
    std::vector<hmfem::Point2> nodes;
    std::vector<bool> bd;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            nodes.push_back({double(i) / n, double(j) / n});
            bd.push_back(i == 0 || j == 0 || i == n || j == n);
        }
    std::vector<std::array<std::size_t, 3>> tris;
    auto id = [n](int i, int j) { return std::size_t(j * (n + 1) + i); };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return hmfem::Mesh(std::move(nodes), std::move(tris), std::move(bd), hmfem::Domain::unit_square);
}

inline hmfem::Cluster random_cluster(const hmfem::Mesh& mesh, std::size_t size, std::mt19937_64& rng)
{
    std::uniform_int_distribution<std::size_t> pick(0, mesh.num_elements() - 1);
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < size; ++k)
        ids.push_back(pick(rng));
    return hmfem::Cluster(std::move(ids));
}

inline hmfem::GradingSpec lshape_grading(double alpha, double h)
{
    return {{{0.5, 0.5}}, alpha, h};
}

// graded L-shape, alpha = 5, N in the desk band
inline constexpr double desk_coarse_width = 0.06;

} // namespace testing_support
