#pragma once

// Geometric cluster trees over DOF indices and the admissible block partition.

#include <hmfem/detail/common.hpp>
#include <hmfem/fem.hpp>
#include <hmfem/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hmfem {

/// omega(I): union of the carrier elements of the duals in I.
inline Cluster index_patch(const DualSystem& dual, std::span<const std::size_t> indices)
{
    std::vector<std::size_t> ids;
    ids.reserve(indices.size());
    for (auto n : indices) {
        detail::require(n < dual.size(), "index_patch: index out of range");
        ids.push_back(dual.carrier[n]);
    }
    return Cluster(std::move(ids));
}

struct Box
{
    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -std::numeric_limits<double>::infinity();
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -std::numeric_limits<double>::infinity();

    void add(Point2 p)
    {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    bool contains(const Box& o) const
    {
        return xmin <= o.xmin && o.xmax <= xmax && ymin <= o.ymin && o.ymax <= ymax;
    }
    bool contains(Point2 p, double tol = 0.0) const
    {
        return xmin - tol <= p.x && p.x <= xmax + tol && ymin - tol <= p.y && p.y <= ymax + tol;
    }
};

struct ClusterNode
{
    std::vector<std::size_t> indices;  // sorted DOF indices
    Box box;                           // of the carrier incenters
    std::array<int, 2> children{-1, -1};
    int parent = -1;
    std::size_t level = 1;             // root = 1
    Cluster patch;                     // omega(indices)
    double diam = 0.0;                 // diam(omega(indices))

    bool is_leaf() const { return children[0] < 0; }
};

class ClusterTree
{
public:
    const std::vector<ClusterNode>& nodes() const { return nodes_; }
    const ClusterNode& node(int i) const { return nodes_[std::size_t(i)]; }
    int root() const { return 0; }
    std::size_t depth() const { return depth_; }
    std::size_t c_small() const { return c_small_; }
    std::size_t num_indices() const { return nodes_.front().indices.size(); }

    std::vector<int> leaves() const
    {
        std::vector<int> out;
        collect_leaves(0, out);
        return out;
    }

    /// DOF indices in leaf order; every cluster is a contiguous range in it.
    std::vector<std::size_t> leaf_order() const
    {
        std::vector<std::size_t> out;
        for (int l : leaves())
            out.insert(out.end(), node(l).indices.begin(), node(l).indices.end());
        return out;
    }

    /// Copy with the children of randomly chosen nodes swapped.
    ClusterTree permuted(std::uint64_t seed) const
    {
        ClusterTree t = *this;
        std::mt19937_64 rng(seed);
        for (auto& n : t.nodes_)
            if (!n.is_leaf() && (rng() & 1u))
                std::swap(n.children[0], n.children[1]);
        return t;
    }

private:
    friend ClusterTree build_cluster_tree(const Mesh&, const DualSystem&, std::size_t);

    void collect_leaves(int i, std::vector<int>& out) const
    {
        const auto& n = node(i);
        if (n.is_leaf()) {
            out.push_back(i);
            return;
        }
        collect_leaves(n.children[0], out);
        collect_leaves(n.children[1], out);
    }

    std::vector<ClusterNode> nodes_;
    std::size_t depth_ = 0;
    std::size_t c_small_ = 0;
};

namespace detail {

inline void finish_cluster_node(ClusterNode& n, const Mesh& mesh, const DualSystem& dual)
{
    n.box = Box{};
    for (auto i : n.indices)
        n.box.add(mesh.element(dual.carrier[i]).incenter);
    n.patch = index_patch(dual, n.indices);
    n.diam = cluster_diam(mesh, n.patch);
}

// Bisection at the midpoint of the longest box axis (ties to x); median split
// when one side would be empty.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_cluster(const ClusterNode& n, const Mesh& mesh, const DualSystem& dual)
{
    const bool along_x = (n.box.xmax - n.box.xmin) >= (n.box.ymax - n.box.ymin);
    auto coord = [&](std::size_t i) {
        const Point2 p = mesh.element(dual.carrier[i]).incenter;
        return along_x ? p.x : p.y;
    };
    const double mid = along_x ? 0.5 * (n.box.xmin + n.box.xmax) : 0.5 * (n.box.ymin + n.box.ymax);
    std::vector<std::size_t> a, b;
    for (auto i : n.indices)
        (coord(i) < mid ? a : b).push_back(i);
    if (!a.empty() && !b.empty())
        return {std::move(a), std::move(b)};

    std::vector<std::size_t> sorted = n.indices;
    std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t i, std::size_t j) { return coord(i) < coord(j); });
    const auto half = sorted.begin() + std::ptrdiff_t(sorted.size() / 2);
    a.assign(sorted.begin(), half);
    b.assign(half, sorted.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return {std::move(a), std::move(b)};
}

} // namespace detail

inline ClusterTree build_cluster_tree(const Mesh& mesh, const DualSystem& dual, std::size_t c_small)
{
    detail::require(c_small >= 1, "C_small must be >= 1");
    detail::require(dual.size() >= 1, "cluster tree needs at least one index");
    ClusterTree t;
    t.c_small_ = c_small;
    ClusterNode root;
    root.indices.resize(dual.size());
    std::iota(root.indices.begin(), root.indices.end(), std::size_t{0});
    detail::finish_cluster_node(root, mesh, dual);
    t.nodes_.push_back(std::move(root));
    for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
        t.depth_ = std::max(t.depth_, t.nodes_[i].level);
        if (t.nodes_[i].indices.size() <= c_small)
            continue;
        auto [a, b] = detail::split_cluster(t.nodes_[i], mesh, dual);
        for (int k = 0; k < 2; ++k) {
            ClusterNode c;
            c.indices = std::move(k == 0 ? a : b);
            c.parent = int(i);
            c.level = t.nodes_[i].level + 1;
            detail::finish_cluster_node(c, mesh, dual);
            t.nodes_[i].children[std::size_t(k)] = int(t.nodes_.size());
            t.nodes_.push_back(std::move(c));
        }
    }
    return t;
}

//
// block partition
//

struct Block
{
    int row = -1;  // cluster tree node of I
    int col = -1;  // cluster tree node of J
    bool admissible = false;
};

struct BlockPartition
{
    const ClusterTree* tree = nullptr;
    std::vector<Block> blocks;   // pre-order of the block tree
    double c_adm = 0.0;
    std::size_t c_small = 0;
    std::size_t depth = 0;       // depth of the block tree, root = 1
    std::size_t forced_small = 0;
    std::size_t block_tree_nodes = 0;
    std::size_t sparsity = 0;    // C_sparse over block tree nodes

    const std::vector<std::size_t>& rows(const Block& b) const { return tree->node(b.row).indices; }
    const std::vector<std::size_t>& cols(const Block& b) const { return tree->node(b.col).indices; }

    std::size_t count(bool admissible) const
    {
        return std::size_t(std::count_if(blocks.begin(), blocks.end(),
                                         [&](const Block& b) { return b.admissible == admissible; }));
    }
};

inline bool admissibility_holds(double diam, double dist, double c_adm)
{
    return 0.0 < diam && diam <= c_adm * dist;
}

/// true iff 0 < diam(omega(I)) <= c_adm * dist(omega(I), omega(J)); scans
/// pairs and stops at the first one closer than diam / c_adm.
inline bool is_admissible(const Mesh& mesh, const ClusterNode& i, const ClusterNode& j, double c_adm)
{
    if (!(i.diam > 0.0))
        return false;
    double best = std::numeric_limits<double>::infinity();
    for (auto t : i.patch)
        for (auto s : j.patch) {
            best = std::min(best, mesh_dist(mesh, t, s));
            if (i.diam > c_adm * best)
                return false;
        }
    return admissibility_holds(i.diam, best, c_adm);
}

inline BlockPartition build_block_partition(const ClusterTree& tree, const Mesh& mesh, double c_adm)
{
    detail::require(c_adm > 0.0, "C_adm must be positive");
    BlockPartition p;
    p.tree = &tree;
    p.c_adm = c_adm;
    p.c_small = tree.c_small();
    std::vector<std::size_t> row_count(tree.nodes().size(), 0), col_count(tree.nodes().size(), 0);

    struct Item
    {
        int row, col;
        std::size_t level;
    };
    std::vector<Item> stack{{tree.root(), tree.root(), 1}};
    while (!stack.empty()) {
        const Item it = stack.back();
        stack.pop_back();
        ++p.block_tree_nodes;
        ++row_count[std::size_t(it.row)];
        ++col_count[std::size_t(it.col)];
        p.depth = std::max(p.depth, it.level);
        const auto& ri = tree.node(it.row);
        const auto& cj = tree.node(it.col);
        if (is_admissible(mesh, ri, cj, c_adm)) {
            p.blocks.push_back({it.row, it.col, true});
            continue;
        }
        if (std::min(ri.indices.size(), cj.indices.size()) <= p.c_small) {
            p.blocks.push_back({it.row, it.col, false});
            continue;
        }
        if (ri.is_leaf() || cj.is_leaf()) {
            ++p.forced_small;
            p.blocks.push_back({it.row, it.col, false});
            continue;
        }
        // push in reverse so children pop in (11, 12, 21, 22) order
        for (int a = 1; a >= 0; --a)
            for (int b = 1; b >= 0; --b)
                stack.push_back({ri.children[std::size_t(a)], cj.children[std::size_t(b)], it.level + 1});
    }
    for (std::size_t k = 0; k < row_count.size(); ++k)
        p.sparsity = std::max({p.sparsity, row_count[k], col_count[k]});
    return p;
}

//
// reporting
//

struct PartitionReport
{
    std::size_t blocks = 0;
    std::size_t admissible = 0;
    std::size_t small = 0;
    std::size_t block_tree_depth = 0;
    std::size_t cluster_tree_depth = 0;
    std::size_t sparsity = 0;
    std::size_t forced_small = 0;
    bool cover_exact = false;        // cardinality sum and probes
    bool admissibility_ok = false;   // verbatim, recomputed with the mesh metric
    bool smallness_ok = false;
};

/// Brute-force verification of the partition invariants.
inline PartitionReport partition_report(const BlockPartition& p, const Mesh& mesh, const DualSystem& dual,
                                        std::size_t probes = 10000, std::uint64_t seed = 1)
{
    PartitionReport r;
    r.blocks = p.blocks.size();
    r.admissible = p.count(true);
    r.small = p.count(false);
    r.block_tree_depth = p.depth;
    r.cluster_tree_depth = p.tree->depth();
    r.sparsity = p.sparsity;
    r.forced_small = p.forced_small;

    const std::size_t n = p.tree->num_indices();
    std::uint64_t area = 0;
    for (const auto& b : p.blocks)
        area += std::uint64_t(p.rows(b).size()) * p.cols(b).size();
    bool probes_ok = true;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t k = 0; k < probes && probes_ok; ++k) {
        const std::size_t i = pick(rng), j = pick(rng);
        std::size_t hits = 0;
        for (const auto& b : p.blocks)
            hits += std::binary_search(p.rows(b).begin(), p.rows(b).end(), i) &&
                    std::binary_search(p.cols(b).begin(), p.cols(b).end(), j);
        probes_ok = hits == 1;
    }
    r.cover_exact = area == std::uint64_t(n) * n && probes_ok;

    r.admissibility_ok = true;
    r.smallness_ok = true;
    for (const auto& b : p.blocks) {
        if (b.admissible) {
            const Cluster bi = index_patch(dual, p.rows(b)), bj = index_patch(dual, p.cols(b));
            if (!admissibility_holds(cluster_diam(mesh, bi), mesh_dist(mesh, bi, bj), p.c_adm))
                r.admissibility_ok = false;
        } else if (std::min(p.rows(b).size(), p.cols(b).size()) > p.c_small) {
            r.smallness_ok = false;
        }
    }
    return r;
}

namespace detail {

inline std::string encode_ranges(const std::vector<std::size_t>& idx)
{
    std::string s;
    for (std::size_t k = 0; k < idx.size();) {
        std::size_t e = k;
        while (e + 1 < idx.size() && idx[e + 1] == idx[e] + 1)
            ++e;
        if (!s.empty())
            s += ',';
        s += std::to_string(idx[k]) + ".." + std::to_string(idx[e]);
        k = e + 1;
    }
    return s;
}

} // namespace detail

/// One line per block: "adm|small <I ranges> <J ranges>".
inline void write_partition(std::ostream& os, const BlockPartition& p)
{
    for (const auto& b : p.blocks)
        os << (b.admissible ? "adm" : "small") << " " << detail::encode_ranges(p.rows(b)) << " "
           << detail::encode_ranges(p.cols(b)) << "\n";
}

} // namespace hmfem
