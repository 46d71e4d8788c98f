#include "support.hpp"

#include <hmfem/geometry.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace hmfem;
using testing_support::structured_square;

namespace {

double brute_dist(const Mesh& m, const Cluster& a, const Cluster& b)
{
    double d = 1e300;
    for (auto t : a)
        for (auto s : b) {
            const Point2 p = m.element(t).incenter, q = m.element(s).incenter;
            d = std::min(d, std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y)));
        }
    return d;
}

double brute_diam(const Mesh& m, const Cluster& a)
{
    double d = 0;
    for (auto t : a)
        for (auto s : a) {
            const Point2 p = m.element(t).incenter, q = m.element(s).incenter;
            d = std::max(d, std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y)));
        }
    return d;
}

// two triangles placed so their incenters sit at prescribed points
Mesh two_triangles(Point2 c0, Point2 c1)
{
    // equilateral triangles with inradius 0.1 centred at c0 and c1
    const double r = 0.1, R = 2 * r;
    std::vector<Point2> nodes;
    for (Point2 c : {c0, c1})
        for (int k = 0; k < 3; ++k) {
            const double a = 2 * M_PI * k / 3 + M_PI / 2;
            nodes.push_back({c.x + R * std::cos(a), c.y + R * std::sin(a)});
        }
    return Mesh(nodes, {{0, 1, 2}, {3, 4, 5}}, std::vector<bool>(6, true));
}

const Mesh& desk_mesh()
{
    static const Mesh m =
        generate_mesh({Domain::lshape, testing_support::lshape_grading(5.0, testing_support::desk_coarse_width), {}});
    return m;
}

std::size_t interior_nodes(const Mesh& m)
{
    std::size_t n = 0;
    for (std::size_t v = 0; v < m.num_nodes(); ++v)
        n += !m.is_boundary_node(v);
    return n;
}

} // namespace

TEST(Element, WidthIsLongestEdgeAndIncenterMatchesClosedForm)
{
    const Mesh m({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {true, true, true});
    const auto& e = m.element(0);
    EXPECT_DOUBLE_EQ(e.width, std::sqrt(2.0));
    const double r = 1.0 - 1.0 / std::sqrt(2.0);  // (a + b - c) / 2 for legs 1, 1
    EXPECT_NEAR(e.inradius, r, 1e-15);
    EXPECT_NEAR(e.incenter.x, r, 1e-15);
    EXPECT_NEAR(e.incenter.y, r, 1e-15);
    EXPECT_LE(e.width / e.inradius, m.shape_constant());
}

TEST(Mesh, ClockwiseInputIsReoriented)
{
    const Mesh m({{0, 0}, {0, 1}, {1, 0}}, {{0, 1, 2}}, {true, true, true});
    const auto& v = m.element(0).vertex_ids;
    EXPECT_GT(cross(m.nodes()[v[1]] - m.nodes()[v[0]], m.nodes()[v[2]] - m.nodes()[v[0]]), 0.0);
}

TEST(Mesh, RejectsDegenerateAndOutOfRange)
{
    EXPECT_THROW(Mesh({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}, {true, true, true}), InvalidInput);
    EXPECT_THROW(Mesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 3}}, {true, true, true}), InvalidInput);
}

TEST(MeshDist, ExamplesAndErrors)
{
    const Mesh m = two_triangles({0, 0}, {3, 4});
    EXPECT_DOUBLE_EQ(mesh_dist(m, Cluster({0}), Cluster({0})), 0.0);
    EXPECT_NEAR(mesh_dist(m, Cluster({0}), Cluster({1})), 5.0, 1e-14);
    EXPECT_THROW(mesh_dist(m, Cluster(), Cluster({1})), InvalidInput);
}

TEST(ClusterDiam, Examples)
{
    const Mesh m = two_triangles({0, 0}, {0.6, 0.8});
    EXPECT_DOUBLE_EQ(cluster_diam(m, Cluster({1})), 0.0);
    EXPECT_NEAR(cluster_diam(m, Cluster({0, 1})), 1.0, 1e-14);
    EXPECT_THROW(cluster_diam(m, Cluster()), InvalidInput);
}

TEST(Metric, RandomClustersMatchBruteForce)
{
    const Mesh m = structured_square(8);
    std::mt19937_64 rng(7);
    for (int k = 0; k < 50; ++k) {
        const auto a = testing_support::random_cluster(m, 1 + k % 9, rng);
        const auto b = testing_support::random_cluster(m, 1 + k % 5, rng);
        EXPECT_NEAR(mesh_dist(m, a, b), brute_dist(m, a, b), 1e-14);
        EXPECT_DOUBLE_EQ(mesh_dist(m, a, b), mesh_dist(m, b, a));
        EXPECT_NEAR(cluster_diam(m, a), brute_diam(m, a), 1e-14);
    }
}

TEST(Metric, TriangleTypeInequality)
{
    const Mesh m = structured_square(6);
    std::mt19937_64 rng(11);
    for (int k = 0; k < 200; ++k) {
        const auto a = testing_support::random_cluster(m, 1 + k % 4, rng);
        const auto b = testing_support::random_cluster(m, 1 + k % 3, rng);
        const auto c = testing_support::random_cluster(m, 1 + k % 5, rng);
        EXPECT_LE(mesh_dist(m, a, c), mesh_dist(m, a, b) + cluster_diam(m, b) + mesh_dist(m, b, c) + 1e-14);
    }
    for (std::size_t t = 0; t < m.num_elements(); ++t)
        for (std::size_t s = 0; s < m.num_elements(); ++s)
            EXPECT_EQ(mesh_dist(m, t, s) == 0.0, t == s);
}

TEST(Inflate, ExamplesAndProperties)
{
    const Mesh m = structured_square(8);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 0.6);
    for (int k = 0; k < 40; ++k) {
        const auto b = testing_support::random_cluster(m, 1 + k % 6, rng);
        EXPECT_EQ(inflate(m, b, 0.0), b);
        EXPECT_EQ(inflate(m, b, std::sqrt(2.0)), Cluster::all(m));
        const double d = u(rng), e = u(rng);
        const auto bd = inflate(m, b, d);
        std::vector<std::size_t> oracle;
        for (std::size_t t = 0; t < m.num_elements(); ++t)
            if (brute_dist(m, Cluster({t}), b) <= d)
                oracle.push_back(t);
        EXPECT_EQ(bd, Cluster(oracle));
        EXPECT_TRUE(bd.includes(b));
        EXPECT_TRUE(inflate(m, b, d + e).includes(bd));
        EXPECT_TRUE(inflate(m, b, d + e).includes(inflate(m, bd, e)));
        EXPECT_LE(cluster_diam(m, bd), cluster_diam(m, b) + 2 * d + 1e-14);
    }
    EXPECT_THROW(inflate(m, Cluster({0}), -1.0), InvalidInput);
}

TEST(Patch, ElementVertexAndWholeMesh)
{
    const Mesh m = structured_square(4);
    EXPECT_EQ(patch(m, Cluster::all(m)), Cluster::all(m));
    // element patch = all elements sharing a vertex
    for (std::size_t t = 0; t < m.num_elements(); ++t) {
        std::vector<std::size_t> oracle;
        for (std::size_t s = 0; s < m.num_elements(); ++s)
            for (auto a : m.element(t).vertex_ids)
                for (auto b : m.element(s).vertex_ids)
                    if (a == b)
                        oracle.push_back(s);
        EXPECT_EQ(patch(m, Cluster({t})), Cluster(oracle));
    }
    // vertex region: incident elements only
    for (std::size_t v = 0; v < m.num_nodes(); ++v) {
        std::vector<std::size_t> oracle;
        for (std::size_t s = 0; s < m.num_elements(); ++s)
            for (auto a : m.element(s).vertex_ids)
                if (a == v)
                    oracle.push_back(s);
        EXPECT_EQ(patch(m, m.nodes()[v]), Cluster(oracle));
    }
    // interior vertex of the diagonal pattern has 6 incident elements
    EXPECT_EQ(patch(m, Point2{0.5, 0.5}).size(), 6u);
}

TEST(GenerateMesh, RequiresExactlyOneMode)
{
    EXPECT_THROW(generate_mesh({Domain::lshape, {}, {}}), InvalidInput);
    EXPECT_THROW(generate_mesh({Domain::lshape, testing_support::lshape_grading(5, 0.1), 0.1}), InvalidInput);
    EXPECT_THROW(generate_mesh({Domain::lshape, GradingSpec{{{0.3, 0.1}}, 5.0, 0.1}, {}}), InvalidInput);
    EXPECT_THROW(generate_mesh({Domain::lshape, GradingSpec{{{0.5, 0.5}}, 0.5, 0.1}, {}}), InvalidInput);
    EXPECT_THROW(generate_mesh({Domain::lshape, GradingSpec{{}, 5.0, 0.1}, {}}), InvalidInput);
    EXPECT_THROW(generate_mesh({Domain::unit_square, {}, -0.1}), InvalidInput);
}

TEST(GenerateMesh, UniformSquare)
{
    const Mesh m = generate_mesh({Domain::unit_square, {}, 0.1});
    EXPECT_LE(m.h_max(), 0.1);
    EXPECT_LE(m.h_max() / m.h_min(), 4.0);
    const auto c = check_mesh(m, true);
    EXPECT_TRUE(c.ok()) << c.area_rel_error << " " << c.bad_edges;
}

TEST(GenerateMesh, AlphaOneIsUniform)
{
    const Mesh g = generate_mesh({Domain::lshape, testing_support::lshape_grading(1.0, 0.05), {}});
    const Mesh u = generate_mesh({Domain::lshape, {}, 0.1});
    std::ostringstream a, b;
    write_mesh(a, g);
    write_mesh(b, u);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_LE(g.h_max() / g.h_min(), 4.0);
}

TEST(GenerateMesh, DeskGradedLShape)
{
    const Mesh& m = desk_mesh();
    const std::size_t n = interior_nodes(m);
    EXPECT_GE(n, 1500u);
    EXPECT_LE(n, 4000u);
    const auto st = grading_stats(m, *m.grading());
    EXPECT_LE(st.spread(), grading_spread_limit);
    EXPECT_LE(m.shape_constant(), 10.0);
    const auto c = check_mesh(m);
    EXPECT_TRUE(c.ok());
    // every element obeys the grading law within the recorded ratios
    for (const auto& e : m.elements()) {
        const double r = e.width / (std::pow(distance(e.incenter, {0.5, 0.5}), 0.8) * testing_support::desk_coarse_width);
        EXPECT_GE(r, st.min_ratio * (1 - 1e-12));
        EXPECT_LE(r, st.max_ratio * (1 + 1e-12));
    }
}

TEST(GenerateMesh, NeighborBoundOverAllPairs)
{
    const Mesh m = generate_mesh({Domain::lshape, testing_support::lshape_grading(5.0, 0.2), {}});
    EXPECT_TRUE(check_mesh(m, true).ok());
}

TEST(GenerateMesh, PaperScaleDofCount)
{
    // N about 72,000 at H = 0.0095
    const Mesh m = generate_mesh({Domain::lshape, testing_support::lshape_grading(5.0, 0.0095), {}});
    const double n = double(interior_nodes(m));
    EXPECT_NEAR(n, 72000.0, 7200.0);
}

TEST(Cardinality, UniformAndGradedPass)
{
    const Mesh u1 = generate_mesh({Domain::unit_square, {}, 0.1});
    const Mesh u2 = generate_mesh({Domain::unit_square, {}, 0.05});
    for (const Mesh* m : {&u1, &u2}) {
        const auto r = regularity_cardinality_report(*m, 1.0, 100);
        EXPECT_TRUE(r.passed()) << r.width_ratio << " " << r.max_cluster_ratio;
    }
    const auto g = regularity_cardinality_report(desk_mesh(), 5.0, 100);
    EXPECT_TRUE(g.passed()) << g.width_ratio << " " << g.max_cluster_ratio;
}

TEST(Cardinality, GradedAtUnitExponentGrowsUnderRefinement)
{
    const Mesh coarse = generate_mesh({Domain::lshape, testing_support::lshape_grading(5.0, 0.12), {}});
    const auto a = regularity_cardinality_report(coarse, 1.0, 100);
    const auto b = regularity_cardinality_report(desk_mesh(), 1.0, 100);
    EXPECT_GT(b.width_ratio, 2.0 * a.width_ratio);
    EXPECT_THROW(regularity_cardinality_report(coarse, 0.5, 10), InvalidInput);
}

TEST(MeshIo, RoundTrip)
{
    const Mesh m = generate_mesh({Domain::lshape, testing_support::lshape_grading(5.0, 0.2), {}});
    std::stringstream s;
    write_mesh(s, m);
    const Mesh r = read_mesh(s, Domain::lshape);
    std::ostringstream a, b;
    write_mesh(a, m);
    write_mesh(b, r);
    EXPECT_EQ(a.str(), b.str());
    std::istringstream bad("nodes 1 elements");
    EXPECT_THROW(read_mesh(bad), InvalidInput);
}
