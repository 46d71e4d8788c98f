#include "support.hpp"

#include <hmfem/clustering.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <tuple>

using namespace hmfem;
using testing_support::lshape_grading;
using testing_support::structured_square;

namespace {

struct Discretization
{
    Mesh mesh;
    DofMap dofs;
    DualSystem dual;
};

Discretization graded(double h)
{
    Mesh m = generate_mesh({Domain::lshape, lshape_grading(5.0, h), std::nullopt});
    DofMap d = make_dofmap(m);
    DualSystem s = build_dual_system(m, d);
    return {std::move(m), std::move(d), std::move(s)};
}

const Discretization& desk()
{
    static const Discretization s = graded(testing_support::desk_coarse_width);
    return s;
}

// canonical block set, independent of traversal order
std::set<std::tuple<std::vector<std::size_t>, std::vector<std::size_t>, bool>> block_set(const BlockPartition& p)
{
    std::set<std::tuple<std::vector<std::size_t>, std::vector<std::size_t>, bool>> out;
    for (const auto& b : p.blocks)
        out.insert({p.rows(b), p.cols(b), b.admissible});
    return out;
}

} // namespace

TEST(IndexPatch, SingletonIsItsCarrier)
{
    const auto& s = desk();
    for (std::size_t n : {std::size_t{0}, s.dual.size() / 2, s.dual.size() - 1}) {
        const std::vector<std::size_t> idx{n};
        const Cluster c = index_patch(s.dual, idx);
        ASSERT_EQ(c.size(), 1u);
        EXPECT_EQ(*c.begin(), s.dual.carrier[n]);
    }
}

TEST(IndexPatch, AllIndicesGiveAllCarriers)
{
    const auto& s = desk();
    std::vector<std::size_t> all(s.dual.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const Cluster c = index_patch(s.dual, all);
    const std::set<std::size_t> carriers(s.dual.carrier.begin(), s.dual.carrier.end());
    EXPECT_EQ(c.size(), carriers.size());
    EXPECT_LE(c.size(), s.mesh.num_elements());
}

TEST(IndexPatch, MatchesUnionOfSupports)
{
    const auto& s = desk();
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, s.dual.size() - 1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> idx;
        for (int k = 0; k < 40; ++k)
            idx.push_back(pick(rng));
        std::set<std::size_t> oracle;
        for (auto n : idx) {
            // support = elements on which lambda_n is nonzero
            for (std::size_t t = 0; t < s.mesh.num_elements(); ++t)
                if (t == s.dual.carrier[n])
                    oracle.insert(t);
        }
        const Cluster c = index_patch(s.dual, idx);
        EXPECT_EQ(std::vector<std::size_t>(c.begin(), c.end()), std::vector<std::size_t>(oracle.begin(), oracle.end()));
    }
}

TEST(IndexPatch, RejectsOutOfRange)
{
    const auto& s = desk();
    const std::vector<std::size_t> idx{s.dual.size()};
    EXPECT_THROW(index_patch(s.dual, idx), InvalidInput);
}

TEST(ClusterTree, StructuralInvariants)
{
    const auto& s = desk();
    const auto t = build_cluster_tree(s.mesh, s.dual, 25);
    std::size_t max_level = 0;
    for (std::size_t i = 0; i < t.nodes().size(); ++i) {
        const auto& n = t.nodes()[i];
        max_level = std::max(max_level, n.level);
        EXPECT_TRUE(std::is_sorted(n.indices.begin(), n.indices.end()));
        if (n.is_leaf()) {
            EXPECT_LE(n.indices.size(), 25u);
            continue;
        }
        const auto& a = t.node(n.children[0]);
        const auto& b = t.node(n.children[1]);
        ASSERT_FALSE(a.indices.empty());
        ASSERT_FALSE(b.indices.empty());
        EXPECT_LT(a.indices.size(), n.indices.size());
        EXPECT_LT(b.indices.size(), n.indices.size());
        std::vector<std::size_t> merged;
        std::set_union(a.indices.begin(), a.indices.end(), b.indices.begin(), b.indices.end(),
                       std::back_inserter(merged));
        EXPECT_EQ(merged, n.indices);
        EXPECT_EQ(a.indices.size() + b.indices.size(), n.indices.size());
        EXPECT_TRUE(n.box.contains(a.box));
        EXPECT_TRUE(n.box.contains(b.box));
        EXPECT_EQ(a.level, n.level + 1);
        EXPECT_EQ(a.parent, int(i));
    }
    EXPECT_EQ(t.depth(), max_level);
    EXPECT_EQ(t.node(t.root()).indices.size(), s.dual.size());
}

TEST(ClusterTree, LeafOrderIsAPermutationWithContiguousClusters)
{
    const auto& s = desk();
    const auto t = build_cluster_tree(s.mesh, s.dual, 25);
    const auto order = t.leaf_order();
    std::vector<std::size_t> pos(order.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        pos[order[k]] = k;
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k)
        ASSERT_EQ(sorted[k], k);
    for (const auto& n : t.nodes()) {
        std::size_t lo = order.size(), hi = 0;
        for (auto i : n.indices) {
            lo = std::min(lo, pos[i]);
            hi = std::max(hi, pos[i]);
        }
        EXPECT_EQ(hi - lo + 1, n.indices.size());
    }
}

TEST(ClusterTree, FewIndicesGiveASingleNode)
{
    const Mesh m = structured_square(4);
    const auto d = make_dofmap(m);
    const auto dual = build_dual_system(m, d);
    const auto t = build_cluster_tree(m, dual, 25);
    EXPECT_EQ(t.nodes().size(), 1u);
    EXPECT_TRUE(t.node(t.root()).is_leaf());
    EXPECT_EQ(t.depth(), 1u);

    const auto p = build_block_partition(t, m, 2.0);
    ASSERT_EQ(p.blocks.size(), 1u);
    EXPECT_FALSE(p.blocks[0].admissible);
    EXPECT_EQ(p.rows(p.blocks[0]).size(), 9u);
    const auto r = partition_report(p, m, dual);
    EXPECT_EQ(r.sparsity, 1u);
    EXPECT_EQ(r.block_tree_depth, 1u);
    EXPECT_TRUE(r.cover_exact);
}

TEST(ClusterTree, RejectsZeroLeafSize)
{
    const auto& s = desk();
    EXPECT_THROW(build_cluster_tree(s.mesh, s.dual, 0), InvalidInput);
}

TEST(ClusterTree, DeeperNearTheGradingCenter)
{
    const auto& s = desk();
    const auto t = build_cluster_tree(s.mesh, s.dual, 25);
    std::vector<std::size_t> depths;
    std::size_t near = 0;
    for (int l : t.leaves()) {
        depths.push_back(t.node(l).level);
        if (t.node(l).box.contains(Point2{0.5, 0.5}, 1e-12))
            near = std::max(near, t.node(l).level);
    }
    std::nth_element(depths.begin(), depths.begin() + std::ptrdiff_t(depths.size() / 2), depths.end());
    const std::size_t median = depths[depths.size() / 2];
    EXPECT_GT(near, median);
}

TEST(ClusterTree, DepthGrowsLogarithmicallyInMinimalWidth)
{
    // three members of the graded family, coarse width halving each time
    std::vector<double> x, y;
    for (double h : {0.12, 0.06, 0.03}) {
        const Discretization s = graded(h);
        const auto t = build_cluster_tree(s.mesh, s.dual, 25);
        const double lg = std::log2(1.0 / s.mesh.h_min());
        x.push_back(lg);
        y.push_back(double(t.depth()));
        EXPECT_LE(double(t.depth()), 2.5 * std::log(1.0 / s.mesh.h_min()) + 2.0);
    }
    for (std::size_t k = 1; k < x.size(); ++k) {
        const double per_halving = (y[k] - y[k - 1]) / (x[k] - x[k - 1]);
        EXPECT_GT(per_halving, 0.0);
        EXPECT_LE(per_halving, 3.0);
    }
}

TEST(BlockPartition, AdmissibilityInequality)
{
    EXPECT_TRUE(admissibility_holds(0.1, 0.2, 2.0));
    EXPECT_TRUE(admissibility_holds(0.4, 0.2, 2.0));
    EXPECT_FALSE(admissibility_holds(0.41, 0.2, 2.0));
    EXPECT_FALSE(admissibility_holds(0.0, 1.0, 2.0));
    EXPECT_FALSE(admissibility_holds(0.1, 0.0, 2.0));
}

TEST(BlockPartition, DeskPartitionIsValid)
{
    const auto& s = desk();
    const auto t = build_cluster_tree(s.mesh, s.dual, 25);
    const auto p = build_block_partition(t, s.mesh, 2.0);
    const auto r = partition_report(p, s.mesh, s.dual);
    EXPECT_TRUE(r.cover_exact);
    EXPECT_TRUE(r.admissibility_ok);
    EXPECT_TRUE(r.smallness_ok);
    EXPECT_EQ(r.forced_small, 0u);
    EXPECT_GT(r.admissible, 0u);
    EXPECT_EQ(r.admissible + r.small, r.blocks);
    EXPECT_EQ(r.cluster_tree_depth, t.depth());
    EXPECT_LE(r.block_tree_depth, t.depth());
}

TEST(BlockPartition, SmallBlocksClusterAlongTheDiagonal)
{
    const auto& s = desk();
    const auto t = build_cluster_tree(s.mesh, s.dual, 25);
    const auto p = build_block_partition(t, s.mesh, 2.0);
    const auto order = t.leaf_order();
    std::vector<std::size_t> pos(order.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        pos[order[k]] = k;
    const double n = double(order.size());
    auto center = [&](const std::vector<std::size_t>& idx) {
        double c = 0;
        for (auto i : idx)
            c += double(pos[i]);
        return c / double(idx.size());
    };
    // distance of each block center from the diagonal, in units of N
    std::vector<double> small, adm;
    for (const auto& b : p.blocks)
        (b.admissible ? adm : small).push_back(std::abs(center(p.rows(b)) - center(p.cols(b))) / n);
    ASSERT_FALSE(small.empty());
    ASSERT_FALSE(adm.empty());
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    EXPECT_LT(median(small), 0.25 * median(adm));
    const auto in_band = std::count_if(small.begin(), small.end(), [](double d) { return d <= 0.1; });
    EXPECT_GT(double(in_band) / double(small.size()), 0.5);
}

TEST(BlockPartition, SparsityAndDepthAcrossSizes)
{
    for (double h : {0.12, 0.06, 0.03}) {
        const Discretization s = graded(h);
        const auto t = build_cluster_tree(s.mesh, s.dual, 25);
        const auto p = build_block_partition(t, s.mesh, 2.0);
        EXPECT_LE(p.sparsity, 40u) << "N=" << s.dual.size();
        EXPECT_LE(double(p.depth), 2.5 * std::log(1.0 / s.mesh.h_min()) + 2.0);
        EXPECT_EQ(p.forced_small, 0u);
    }
}

TEST(BlockPartition, IndependentOfChildOrder)
{
    const auto& s = desk();
    const auto t = build_cluster_tree(s.mesh, s.dual, 25);
    const auto ref = block_set(build_block_partition(t, s.mesh, 2.0));
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto tp = t.permuted(seed);
        EXPECT_NE(tp.leaf_order(), t.leaf_order());
        EXPECT_EQ(block_set(build_block_partition(tp, s.mesh, 2.0)), ref);
    }
}

TEST(BlockPartition, DeterministicExport)
{
    const auto& s = desk();
    auto render = [&] {
        const auto t = build_cluster_tree(s.mesh, s.dual, 25);
        const auto p = build_block_partition(t, s.mesh, 2.0);
        std::ostringstream os;
        write_partition(os, p);
        return os.str();
    };
    EXPECT_EQ(render(), render());
}

TEST(BlockPartition, ExportFormat)
{
    const Mesh m = structured_square(8);
    const auto d = make_dofmap(m);
    const auto dual = build_dual_system(m, d);
    const auto t = build_cluster_tree(m, dual, 4);
    const auto p = build_block_partition(t, m, 2.0);
    std::ostringstream os;
    write_partition(os, p);
    std::istringstream is(os.str());
    const std::regex line(R"((adm|small) \d+\.\.\d+(,\d+\.\.\d+)* \d+\.\.\d+(,\d+\.\.\d+)*)");
    std::string l;
    std::size_t count = 0;
    while (std::getline(is, l)) {
        EXPECT_TRUE(std::regex_match(l, line)) << l;
        ++count;
    }
    EXPECT_EQ(count, p.blocks.size());
    EXPECT_EQ(detail::encode_ranges({0, 1, 2, 5, 7, 8}), "0..2,5..5,7..8");
}

TEST(BlockPartition, RejectsNonPositiveConstant)
{
    const auto& s = desk();
    const auto t = build_cluster_tree(s.mesh, s.dual, 25);
    EXPECT_THROW(build_block_partition(t, s.mesh, 0.0), InvalidInput);
    EXPECT_THROW(build_block_partition(t, s.mesh, -1.0), InvalidInput);
}
