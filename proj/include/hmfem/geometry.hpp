#pragma once

// Triangular meshes of the unit square and the L-shaped domain, uniform or
// algebraically graded towards a finite point set, together with the
// incenter-based mesh metric used by every admissibility decision.

#include <hmfem/detail/common.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace hmfem {

struct Point2
{
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Point2 a, Point2 b) = default;
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(b - a); }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

enum class Domain { unit_square, lshape };

inline std::string to_string(Domain d)
{
    return d == Domain::unit_square ? "unit_square" : "lshape";
}

inline Domain parse_domain(const std::string& s)
{
    if (s == "unit_square")
        return Domain::unit_square;
    if (s == "lshape")
        return Domain::lshape;
    throw InvalidInput("unknown domain '" + s + "' (expected unit_square or lshape)");
}

inline double domain_area(Domain d) { return d == Domain::unit_square ? 1.0 : 0.75; }
inline double domain_diameter(Domain) { return std::sqrt(2.0); }

/// True if p lies on the boundary of the domain (up to tol).
inline bool on_domain_boundary(Domain d, Point2 p, double tol = 1e-14)
{
    auto near = [tol](double a, double b) { return std::abs(a - b) <= tol; };
    const bool in01x = p.x >= -tol && p.x <= 1 + tol;
    const bool in01y = p.y >= -tol && p.y <= 1 + tol;
    if (d == Domain::unit_square)
        return ((near(p.x, 0) || near(p.x, 1)) && in01y) || ((near(p.y, 0) || near(p.y, 1)) && in01x);
    // L-shape: (0,1)^2 minus [1/2,1]^2
    if (near(p.x, 0) && in01y)
        return true;
    if (near(p.y, 0) && in01x)
        return true;
    if (near(p.x, 1) && p.y >= -tol && p.y <= 0.5 + tol)
        return true;
    if (near(p.y, 1) && p.x >= -tol && p.x <= 0.5 + tol)
        return true;
    if (near(p.x, 0.5) && p.y >= 0.5 - tol && p.y <= 1 + tol)
        return true;
    if (near(p.y, 0.5) && p.x >= 0.5 - tol && p.x <= 1 + tol)
        return true;
    return false;
}

/// Grading h(T) ~ dist(x_T, gamma)^(1 - 1/alpha) * coarse_width.
struct GradingSpec
{
    std::vector<Point2> gamma_set;
    double alpha = 1.0;
    double coarse_width = 0.1;

    double distance_to_gamma(Point2 p) const
    {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& g : gamma_set)
            d = std::min(d, distance(p, g));
        return d;
    }

    /// Width prescribed by the grading law at p.
    double target_width(Point2 p) const
    {
        const double e = 1.0 - 1.0 / alpha;
        if (e == 0.0)
            return coarse_width;
        return std::pow(distance_to_gamma(p), e) * coarse_width;
    }
};

struct Element
{
    std::array<std::size_t, 3> vertex_ids{};
    Point2 incenter;
    double width = 0.0;   // h(T), the longest edge
    double inradius = 0.0;
    double area = 0.0;
};

/// Immutable conforming triangulation. Vertex order of each element is
/// counter-clockwise.
class Mesh
{
public:
    Mesh(std::vector<Point2> nodes, std::vector<std::array<std::size_t, 3>> triangles,
         std::vector<bool> boundary_flags, std::optional<Domain> domain = std::nullopt,
         std::optional<GradingSpec> grading = std::nullopt)
        : nodes_(std::move(nodes)), boundary_(std::move(boundary_flags)), domain_(domain),
          grading_(std::move(grading))
    {
        detail::require(!triangles.empty(), "mesh needs at least one element");
        detail::require(boundary_.size() == nodes_.size(), "boundary flag count must match node count");
        elements_.reserve(triangles.size());
        for (auto t : triangles) {
            for (auto v : t)
                detail::require(v < nodes_.size(), "element references a node out of range");
            Point2 p0 = nodes_[t[0]], p1 = nodes_[t[1]], p2 = nodes_[t[2]];
            double sa = cross(p1 - p0, p2 - p0);
            detail::require(sa != 0.0, "degenerate element");
            if (sa < 0) {
                std::swap(t[0], t[1]);
                std::swap(p0, p1);
                sa = -sa;
            }
            const double a = distance(p1, p2), b = distance(p2, p0), c = distance(p0, p1);
            Element e;
            e.vertex_ids = t;
            e.area = 0.5 * sa;
            e.width = std::max({a, b, c});
            e.inradius = 2.0 * e.area / (a + b + c);
            e.incenter = (1.0 / (a + b + c)) * (a * p0 + b * p1 + c * p2);
            elements_.push_back(e);
        }
        build_adjacency();
        compute_shape_constants();
    }

    const std::vector<Point2>& nodes() const { return nodes_; }
    const std::vector<Element>& elements() const { return elements_; }
    const Element& element(std::size_t t) const { return elements_[t]; }
    std::size_t num_nodes() const { return nodes_.size(); }
    std::size_t num_elements() const { return elements_.size(); }
    bool is_boundary_node(std::size_t v) const { return boundary_[v]; }
    const std::vector<bool>& boundary_flags() const { return boundary_; }
    std::optional<Domain> domain() const { return domain_; }
    const std::optional<GradingSpec>& grading() const { return grading_; }

    /// Realized C_shape: smallest C with Ball(x_T, h/C) in T and patch(T) in Ball(x_T, C h).
    double shape_constant() const { return shape_constant_; }
    /// max over T and S in patch(T) of dist(x_T, x_S) / h(T).
    double neighbor_constant() const { return neighbor_constant_; }

    /// Elements incident to node v, ascending.
    std::span<const std::size_t> node_elements(std::size_t v) const
    {
        return {node_elem_.data() + node_elem_start_[v], node_elem_start_[v + 1] - node_elem_start_[v]};
    }
    /// Elements whose closure meets the closure of t (t included), ascending.
    std::span<const std::size_t> element_patch(std::size_t t) const
    {
        return {patch_.data() + patch_start_[t], patch_start_[t + 1] - patch_start_[t]};
    }

    double h_max() const
    {
        double h = 0;
        for (const auto& e : elements_)
            h = std::max(h, e.width);
        return h;
    }
    double h_min() const
    {
        double h = std::numeric_limits<double>::infinity();
        for (const auto& e : elements_)
            h = std::min(h, e.width);
        return h;
    }
    double total_area() const
    {
        double a = 0;
        for (const auto& e : elements_)
            a += e.area;
        return a;
    }

private:
    void build_adjacency()
    {
        const std::size_t nn = nodes_.size();
        node_elem_start_.assign(nn + 1, 0);
        for (const auto& e : elements_)
            for (auto v : e.vertex_ids)
                ++node_elem_start_[v + 1];
        std::partial_sum(node_elem_start_.begin(), node_elem_start_.end(), node_elem_start_.begin());
        node_elem_.resize(node_elem_start_.back());
        std::vector<std::size_t> fill(node_elem_start_.begin(), node_elem_start_.end() - 1);
        for (std::size_t t = 0; t < elements_.size(); ++t)
            for (auto v : elements_[t].vertex_ids)
                node_elem_[fill[v]++] = t;

        patch_start_.assign(elements_.size() + 1, 0);
        patch_.clear();
        std::vector<std::size_t> buf;
        for (std::size_t t = 0; t < elements_.size(); ++t) {
            buf.clear();
            for (auto v : elements_[t].vertex_ids) {
                auto ne = node_elements(v);
                buf.insert(buf.end(), ne.begin(), ne.end());
            }
            std::sort(buf.begin(), buf.end());
            buf.erase(std::unique(buf.begin(), buf.end()), buf.end());
            patch_.insert(patch_.end(), buf.begin(), buf.end());
            patch_start_[t + 1] = patch_.size();
        }
    }

    void compute_shape_constants()
    {
        double cs = 1.0, cn = 0.0;
        for (std::size_t t = 0; t < elements_.size(); ++t) {
            const auto& e = elements_[t];
            cs = std::max(cs, e.width / e.inradius);
            for (auto s : element_patch(t)) {
                for (auto v : elements_[s].vertex_ids)
                    cs = std::max(cs, distance(e.incenter, nodes_[v]) / e.width);
                cn = std::max(cn, distance(e.incenter, elements_[s].incenter) / e.width);
            }
        }
        shape_constant_ = cs;
        neighbor_constant_ = cn;
    }

    std::vector<Point2> nodes_;
    std::vector<Element> elements_;
    std::vector<bool> boundary_;
    std::optional<Domain> domain_;
    std::optional<GradingSpec> grading_;
    std::vector<std::size_t> node_elem_start_, node_elem_;
    std::vector<std::size_t> patch_start_, patch_;
    double shape_constant_ = 1.0;
    double neighbor_constant_ = 0.0;
};

/// Sorted, duplicate-free set of element indices.
class Cluster
{
public:
    Cluster() = default;
    explicit Cluster(std::vector<std::size_t> ids) : ids_(std::move(ids))
    {
        std::sort(ids_.begin(), ids_.end());
        ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    }
    static Cluster all(const Mesh& mesh)
    {
        std::vector<std::size_t> ids(mesh.num_elements());
        std::iota(ids.begin(), ids.end(), std::size_t{0});
        return Cluster(std::move(ids));
    }

    const std::vector<std::size_t>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    bool contains(std::size_t t) const { return std::binary_search(ids_.begin(), ids_.end(), t); }
    bool includes(const Cluster& other) const
    {
        return std::includes(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end());
    }
    auto begin() const { return ids_.begin(); }
    auto end() const { return ids_.end(); }

    friend bool operator==(const Cluster&, const Cluster&) = default;

    void validate(const Mesh& mesh) const
    {
        detail::require(ids_.empty() || ids_.back() < mesh.num_elements(), "cluster index out of range");
    }

private:
    std::vector<std::size_t> ids_;
};

//
// mesh metric
//

inline double mesh_dist(const Mesh& mesh, std::size_t t, std::size_t s)
{
    return distance(mesh.element(t).incenter, mesh.element(s).incenter);
}

inline double mesh_dist(const Mesh& mesh, const Cluster& a, const Cluster& b)
{
    detail::require(!a.empty() && !b.empty(), "mesh_dist: clusters must be nonempty");
    a.validate(mesh);
    b.validate(mesh);
    double d = std::numeric_limits<double>::infinity();
    for (auto t : a)
        for (auto s : b)
            d = std::min(d, mesh_dist(mesh, t, s));
    return d;
}

namespace detail {

// Andrew's monotone chain; returns hull vertices (collinear points dropped).
inline std::vector<Point2> convex_hull(std::vector<Point2> pts)
{
    std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3)
        return pts;
    std::vector<Point2> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0)
            --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
        while (k >= lo && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0)
            --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

inline double point_set_diameter(std::vector<Point2> pts)
{
    const auto hull = convex_hull(std::move(pts));
    double d = 0;
    for (std::size_t i = 0; i < hull.size(); ++i)
        for (std::size_t j = i + 1; j < hull.size(); ++j)
            d = std::max(d, distance(hull[i], hull[j]));
    return d;
}

} // namespace detail

/// Max incenter distance over pairs in the cluster (0 for singletons).
inline double cluster_diam(const Mesh& mesh, const Cluster& a)
{
    detail::require(!a.empty(), "cluster_diam: cluster must be nonempty");
    a.validate(mesh);
    std::vector<Point2> pts;
    pts.reserve(a.size());
    for (auto t : a)
        pts.push_back(mesh.element(t).incenter);
    return detail::point_set_diameter(std::move(pts));
}

inline double cluster_h_max(const Mesh& mesh, const Cluster& a)
{
    double h = 0;
    for (auto t : a)
        h = std::max(h, mesh.element(t).width);
    return h;
}

/// B^delta = { T : dist(T, B) <= delta }.
inline Cluster inflate(const Mesh& mesh, const Cluster& b, double delta)
{
    detail::require(delta >= 0.0, "inflate: delta must be nonnegative");
    detail::require(!b.empty(), "inflate: cluster must be nonempty");
    b.validate(mesh);
    std::vector<Point2> centers;
    centers.reserve(b.size());
    for (auto s : b)
        centers.push_back(mesh.element(s).incenter);
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        if (b.contains(t)) {
            out.push_back(t);
            continue;
        }
        const Point2 x = mesh.element(t).incenter;
        for (const auto& c : centers) {
            if (distance(x, c) <= delta) {
                out.push_back(t);
                break;
            }
        }
    }
    return Cluster(std::move(out));
}

/// Elements whose closure meets the closure of some member of b.
inline Cluster patch(const Mesh& mesh, const Cluster& b)
{
    b.validate(mesh);
    std::vector<std::size_t> out;
    for (auto t : b) {
        auto p = mesh.element_patch(t);
        out.insert(out.end(), p.begin(), p.end());
    }
    return Cluster(std::move(out));
}

/// Elements whose closure contains the point p.
inline Cluster patch(const Mesh& mesh, Point2 p, double tol = 1e-12)
{
    std::vector<std::size_t> out;
    const auto& nodes = mesh.nodes();
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const auto& e = mesh.element(t);
        const Point2 a = nodes[e.vertex_ids[0]], b = nodes[e.vertex_ids[1]], c = nodes[e.vertex_ids[2]];
        const double two_area = 2.0 * e.area;
        const double l0 = cross(b - p, c - p) / two_area;
        const double l1 = cross(c - p, a - p) / two_area;
        const double l2 = cross(a - p, b - p) / two_area;
        if (l0 >= -tol && l1 >= -tol && l2 >= -tol)
            out.push_back(t);
    }
    return Cluster(std::move(out));
}

/// Patch of a point-set region: union over the region's points.
inline Cluster patch(const Mesh& mesh, std::span<const Point2> region, double tol = 1e-12)
{
    std::vector<std::size_t> out;
    for (const auto& p : region) {
        auto c = patch(mesh, p, tol);
        out.insert(out.end(), c.begin(), c.end());
    }
    return Cluster(std::move(out));
}

//
// generation
//

struct MeshRequest
{
    Domain domain = Domain::lshape;
    std::optional<GradingSpec> grading;
    std::optional<double> uniform_width;
};

/// Element-wise ratios h(T) / (dist(x_T, gamma)^(1-1/alpha) H).
struct GradingStats
{
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    double spread() const { return max_ratio / min_ratio; }
};

inline GradingStats grading_stats(const Mesh& mesh, const GradingSpec& g)
{
    GradingStats s{std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& e : mesh.elements()) {
        const double r = e.width / g.target_width(e.incenter);
        s.min_ratio = std::min(s.min_ratio, r);
        s.max_ratio = std::max(s.max_ratio, r);
    }
    return s;
}

inline constexpr double grading_spread_limit = 16.0;

/// Elements are bisected while h(T) exceeds this multiple of the grading law.
/// With 2 the L-shape family at alpha = 5, H = 0.0095 has N close to 72,000.
inline constexpr double grading_refine_factor = 2.0;
inline constexpr double uniform_spread_limit = 4.0;

namespace detail {

struct Refiner
{
    std::vector<Point2> nodes;
    std::vector<bool> boundary;
    // (v0, v1, v2): refinement edge v0-v1, newest vertex v2.
    std::vector<std::array<std::size_t, 3>> tris;
    std::unordered_set<std::uint64_t> boundary_edges;
    std::unordered_map<std::uint64_t, std::size_t> midpoints;

    static std::uint64_t key(std::size_t a, std::size_t b)
    {
        if (a > b)
            std::swap(a, b);
        return (std::uint64_t(a) << 32) | std::uint64_t(b);
    }

    std::size_t add_node(Point2 p, bool on_boundary)
    {
        nodes.push_back(p);
        boundary.push_back(on_boundary);
        return nodes.size() - 1;
    }

    // ccw with the longest edge as refinement edge
    void add_initial(std::size_t a, std::size_t b, std::size_t c)
    {
        if (cross(nodes[b] - nodes[a], nodes[c] - nodes[a]) < 0)
            std::swap(a, b);
        tris.push_back({a, b, c});
    }

    void finish_initial()
    {
        std::unordered_map<std::uint64_t, int> count;
        for (const auto& t : tris)
            for (int i = 0; i < 3; ++i)
                ++count[key(t[i], t[(i + 1) % 3])];
        for (const auto& [k, c] : count)
            if (c == 1)
                boundary_edges.insert(k);
    }

    double width(const std::array<std::size_t, 3>& t) const
    {
        return std::max({distance(nodes[t[0]], nodes[t[1]]), distance(nodes[t[1]], nodes[t[2]]),
                         distance(nodes[t[2]], nodes[t[0]])});
    }

    Point2 incenter(const std::array<std::size_t, 3>& t) const
    {
        const Point2 p0 = nodes[t[0]], p1 = nodes[t[1]], p2 = nodes[t[2]];
        const double a = distance(p1, p2), b = distance(p2, p0), c = distance(p0, p1);
        return (1.0 / (a + b + c)) * (a * p0 + b * p1 + c * p2);
    }

    std::size_t midpoint(std::size_t a, std::size_t b)
    {
        const auto k = key(a, b);
        if (auto it = midpoints.find(k); it != midpoints.end())
            return it->second;
        const bool bd = boundary_edges.count(k) > 0;
        const std::size_t m = add_node(0.5 * (nodes[a] + nodes[b]), bd);
        if (bd) {
            boundary_edges.erase(k);
            boundary_edges.insert(key(a, m));
            boundary_edges.insert(key(m, b));
        }
        midpoints.emplace(k, m);
        return m;
    }

    void bisect_marked(const std::array<std::size_t, 3>& t, const std::unordered_set<std::uint64_t>& marked,
                       std::vector<std::array<std::size_t, 3>>& out)
    {
        if (!marked.count(key(t[0], t[1]))) {
            out.push_back(t);
            return;
        }
        const std::size_t a = t[0], b = t[1], c = t[2];
        const std::size_t m = midpoint(a, b);
        bisect_marked({c, a, m}, marked, out);
        bisect_marked({b, c, m}, marked, out);
    }

    // One sweep: bisect every element whose width exceeds target(incenter),
    // closing the marking so that no hanging nodes appear. Returns false at fixpoint.
    template <typename Target>
    bool refine_once(const Target& target)
    {
        std::unordered_set<std::uint64_t> marked;
        for (const auto& t : tris)
            if (width(t) > target(incenter(t)))
                marked.insert(key(t[0], t[1]));
        if (marked.empty())
            return false;
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& t : tris) {
                const auto ref = key(t[0], t[1]);
                if (marked.count(ref))
                    continue;
                if (marked.count(key(t[1], t[2])) || marked.count(key(t[2], t[0]))) {
                    marked.insert(ref);
                    changed = true;
                }
            }
        }
        std::vector<std::array<std::size_t, 3>> next;
        next.reserve(tris.size() * 2);
        for (const auto& t : tris)
            bisect_marked(t, marked, next);
        tris = std::move(next);
        midpoints.clear();
        return true;
    }
};

// Squares of side 1/2 split along the diagonal through (1/2, 1/2).
inline Refiner coarse_mesh(Domain domain)
{
    Refiner r;
    std::array<std::array<std::size_t, 3>, 3> id{};
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) {
            const Point2 p{0.5 * i, 0.5 * j};
            const bool used = domain == Domain::unit_square || !(i == 2 && j == 2);
            id[j][i] = used ? r.add_node(p, on_domain_boundary(domain, p)) : std::size_t(-1);
        }
    auto square = [&](int i, int j) {
        // corners
        const std::size_t p00 = id[j][i], p10 = id[j][i + 1], p01 = id[j + 1][i], p11 = id[j + 1][i + 1];
        // diagonal runs through the center node (1,1)
        const bool main_diag = (i == j);
        if (main_diag) {
            r.add_initial(p00, p11, p10);
            r.add_initial(p11, p00, p01);
        } else {
            r.add_initial(p10, p01, p00);
            r.add_initial(p01, p10, p11);
        }
    };
    square(0, 0);
    square(1, 0);
    square(0, 1);
    if (domain == Domain::unit_square)
        square(1, 1);
    r.finish_initial();
    return r;
}

inline bool on_segment(Point2 p, Point2 a, Point2 b, double tol = 1e-14)
{
    const Point2 ab = b - a;
    const double len = norm(ab);
    if (std::abs(cross(ab, p - a)) > tol * std::max(1.0, len))
        return false;
    const double s = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / (len * len);
    return s >= -tol && s <= 1 + tol;
}

} // namespace detail

/// Builds a uniform or graded mesh by newest-vertex bisection from a coarse
/// structured triangulation whose skeleton contains (1/2, 1/2).
inline Mesh generate_mesh(const MeshRequest& req)
{
    detail::require(req.grading.has_value() != req.uniform_width.has_value(),
                    "generate_mesh: give exactly one of grading or uniform_width");
    auto r = detail::coarse_mesh(req.domain);

    if (req.uniform_width) {
        const double w = *req.uniform_width;
        detail::require(w > 0, "uniform_width must be positive");
        while (r.refine_once([w](Point2) { return w; })) {
        }
        Mesh mesh(std::move(r.nodes), std::move(r.tris), std::move(r.boundary), req.domain);
        if (mesh.h_max() / mesh.h_min() > uniform_spread_limit)
            throw NumericalError("uniform mesh exceeds width spread limit");
        return mesh;
    }

    const GradingSpec& g = *req.grading;
    detail::require(g.alpha >= 1.0, "grading exponent alpha must be >= 1");
    detail::require(g.coarse_width > 0.0, "coarse width H must be positive");
    detail::require(!g.gamma_set.empty(), "grading set gamma must be nonempty");
    for (const auto& p : g.gamma_set) {
        bool on_skeleton = false;
        for (const auto& t : r.tris)
            for (int i = 0; i < 3 && !on_skeleton; ++i)
                on_skeleton = detail::on_segment(p, r.nodes[t[i]], r.nodes[t[(i + 1) % 3]]);
        detail::require(on_skeleton, "grading point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                         ") is not on the mesh skeleton");
    }
    while (r.refine_once([&g](Point2 x) { return grading_refine_factor * g.target_width(x); })) {
    }
    Mesh mesh(std::move(r.nodes), std::move(r.tris), std::move(r.boundary), req.domain, g);
    const auto st = grading_stats(mesh, g);
    if (st.spread() > grading_spread_limit) {
        std::ostringstream os;
        os << "grading law not achievable within factor " << grading_spread_limit << ": achieved ratios ["
           << st.min_ratio << ", " << st.max_ratio << "]";
        throw NumericalError(os.str());
    }
    return mesh;
}

//
// invariant checks
//

struct MeshCheck
{
    double area_rel_error = 0.0;
    bool conforming = true;          // every edge shared by 2 elements or on the boundary
    bool incircle_inside = true;     // Ball(x_T, h/C) in T
    bool neighbor_bounds = true;     // metric neighbor upper/lower bounds
    std::size_t bad_edges = 0;

    bool ok() const { return area_rel_error <= 1e-10 && conforming && incircle_inside && neighbor_bounds; }
};

inline MeshCheck check_mesh(const Mesh& mesh, bool check_all_pairs = false)
{
    MeshCheck c;
    if (auto d = mesh.domain())
        c.area_rel_error = std::abs(mesh.total_area() - domain_area(*d)) / domain_area(*d);

    std::unordered_map<std::uint64_t, int> count;
    for (const auto& e : mesh.elements())
        for (int i = 0; i < 3; ++i)
            ++count[detail::Refiner::key(e.vertex_ids[i], e.vertex_ids[(i + 1) % 3])];
    for (const auto& [k, n] : count) {
        const std::size_t a = k >> 32, b = k & 0xffffffffu;
        const Point2 mid = 0.5 * (mesh.nodes()[a] + mesh.nodes()[b]);
        const bool on_bd = mesh.domain() ? on_domain_boundary(*mesh.domain(), mid)
                                         : (mesh.is_boundary_node(a) && mesh.is_boundary_node(b));
        if (n > 2 || (n == 1 && !on_bd) || (n == 2 && on_bd)) {
            c.conforming = false;
            ++c.bad_edges;
        }
    }

    const double cs = mesh.shape_constant();
    // coordinates are O(1), so incenters carry absolute rounding of a few ulp
    constexpr double abs_tol = 1e-14;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const auto& e = mesh.element(t);
        if (e.width / cs > e.inradius * (1 + 1e-12))
            c.incircle_inside = false;
        for (auto s : mesh.element_patch(t)) {
            const double d = mesh_dist(mesh, t, s);
            if (d > cs * e.width * (1 + 1e-9) + abs_tol)
                c.neighbor_bounds = false;
            if (s != t && d < (e.width + mesh.element(s).width) / cs * (1 - 1e-9) - abs_tol)
                c.neighbor_bounds = false;
        }
    }
    if (check_all_pairs) {
        for (std::size_t t = 0; t < mesh.num_elements(); ++t)
            for (std::size_t s = t + 1; s < mesh.num_elements(); ++s)
                if (mesh_dist(mesh, t, s) < (mesh.element(t).width + mesh.element(s).width) / cs * (1 - 1e-9) - abs_tol)
                    c.neighbor_bounds = false;
    }
    return c;
}

//
// locally bounded cardinality diagnostics
//

struct CardinalityReport
{
    double c_card = 1.0;
    double width_ratio = 0.0;        // h_max^C / h_min
    double max_cluster_ratio = 0.0;  // max card(B) / (1 + diam(B)/h_max(B))^(d C)
    std::size_t samples = 0;
    std::size_t violations = 0;
    double limit = 0.0;

    bool passed() const { return violations == 0 && width_ratio <= limit; }
};

/// Cardinality bound used to flag violations; calibrated against the uniform
/// (C = 1) and graded (C = alpha) families.
inline constexpr double cardinality_limit = 50.0;

inline CardinalityReport regularity_cardinality_report(const Mesh& mesh, double c_card, std::size_t sample_count,
                                                       std::uint64_t seed = 1, double limit = cardinality_limit)
{
    detail::require(c_card >= 1.0, "C_card must be >= 1");
    CardinalityReport rep;
    rep.c_card = c_card;
    rep.limit = limit;
    rep.samples = sample_count;
    rep.width_ratio = std::pow(mesh.h_max(), c_card) / mesh.h_min();

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, mesh.num_elements() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double rmax = mesh.domain() ? domain_diameter(*mesh.domain()) : 1.0;
    for (std::size_t k = 0; k < sample_count; ++k) {
        const std::size_t c = pick(rng);
        const double rmin = mesh.element(c).width;
        const double radius = rmin * std::pow(rmax / rmin, unit(rng));
        const Cluster ball = inflate(mesh, Cluster({c}), radius);
        const double denom = std::pow(1.0 + cluster_diam(mesh, ball) / cluster_h_max(mesh, ball), 2.0 * c_card);
        const double ratio = double(ball.size()) / denom;
        rep.max_cluster_ratio = std::max(rep.max_cluster_ratio, ratio);
        if (ratio > limit)
            ++rep.violations;
    }
    return rep;
}

//
// text format
//

inline void write_mesh(std::ostream& os, const Mesh& mesh)
{
    os << "nodes " << mesh.num_nodes() << " elements " << mesh.num_elements() << "\n";
    for (std::size_t v = 0; v < mesh.num_nodes(); ++v)
        os << detail::sci17(mesh.nodes()[v].x) << " " << detail::sci17(mesh.nodes()[v].y) << " "
           << (mesh.is_boundary_node(v) ? 1 : 0) << "\n";
    for (const auto& e : mesh.elements())
        os << e.vertex_ids[0] << " " << e.vertex_ids[1] << " " << e.vertex_ids[2] << "\n";
}

inline Mesh read_mesh(std::istream& is, std::optional<Domain> domain = std::nullopt)
{
    std::string w1, w2;
    std::size_t nn = 0, ne = 0;
    if (!(is >> w1 >> nn >> w2 >> ne) || w1 != "nodes" || w2 != "elements")
        throw InvalidInput("mesh file: bad header");
    std::vector<Point2> nodes(nn);
    std::vector<bool> bd(nn);
    for (std::size_t v = 0; v < nn; ++v) {
        int f = 0;
        if (!(is >> nodes[v].x >> nodes[v].y >> f) || (f != 0 && f != 1))
            throw InvalidInput("mesh file: bad node line " + std::to_string(v));
        bd[v] = f == 1;
    }
    std::vector<std::array<std::size_t, 3>> tris(ne);
    for (std::size_t t = 0; t < ne; ++t)
        if (!(is >> tris[t][0] >> tris[t][1] >> tris[t][2]))
            throw InvalidInput("mesh file: bad element line " + std::to_string(t));
    return Mesh(std::move(nodes), std::move(tris), std::move(bd), domain);
}

} // namespace hmfem
