#pragma once

// P1 Galerkin discretization of
//   -div(a1 grad u) + a2 . grad u + a3 u = f,  u = 0 on the boundary,
// with the element-local dual basis lambda_n and the coordinate maps built on it.

#include <hmfem/detail/common.hpp>
#include <hmfem/geometry.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

namespace hmfem {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct Coefficients
{
    std::function<Eigen::Matrix2d(Point2)> a1;  // diffusion
    std::function<Eigen::Vector2d(Point2)> a2;  // convection
    std::function<double(Point2)> a3;           // reaction

    static Coefficients laplace()
    {
        return {[](Point2) -> Eigen::Matrix2d { return Eigen::Matrix2d::Identity(); },
                [](Point2) -> Eigen::Vector2d { return Eigen::Vector2d::Zero(); }, [](Point2) { return 0.0; }};
    }

    /// a1 = ((10, -1), (-1, 1)), a2 = (10 y, 0), a3 = 1.
    static Coefficients convection_diffusion()
    {
        return {[](Point2) -> Eigen::Matrix2d {
                    Eigen::Matrix2d m;
                    m << 10.0, -1.0, -1.0, 1.0;
                    return m;
                },
                [](Point2 p) -> Eigen::Vector2d { return {10.0 * p.y, 0.0}; }, [](Point2) { return 1.0; }};
    }
};

/// Smallest eigenvalue of the symmetric part of a 2x2 matrix.
inline double min_symmetric_eigenvalue(const Eigen::Matrix2d& a)
{
    const double p = a(0, 0), q = a(1, 1), r = 0.5 * (a(0, 1) + a(1, 0));
    return 0.5 * (p + q - std::sqrt((p - q) * (p - q) + 4.0 * r * r));
}

class CoercivityError : public InvalidInput
{
public:
    CoercivityError(Point2 where, double eig)
        : InvalidInput(message(where, eig)), point(where), eigenvalue(eig)
    {
    }
    Point2 point;
    double eigenvalue;

private:
    static std::string message(Point2 p, double e)
    {
        std::ostringstream os;
        os << "coefficient a1 not coercive at (" << p.x << ", " << p.y << "): min eigenvalue " << e;
        return os.str();
    }
};

/// Interior nodes <-> degrees of freedom (zero-based).
struct DofMap
{
    std::vector<std::ptrdiff_t> node_to_dof;  // -1 on boundary nodes
    std::vector<std::size_t> dof_to_node;

    std::size_t size() const { return dof_to_node.size(); }
    std::ptrdiff_t dof(std::size_t node) const { return node_to_dof[node]; }
};

inline DofMap make_dofmap(const Mesh& mesh)
{
    DofMap d;
    d.node_to_dof.assign(mesh.num_nodes(), -1);
    for (std::size_t v = 0; v < mesh.num_nodes(); ++v) {
        if (!mesh.is_boundary_node(v)) {
            d.node_to_dof[v] = std::ptrdiff_t(d.dof_to_node.size());
            d.dof_to_node.push_back(v);
        }
    }
    return d;
}

//
// element level
//

/// Gradients of the barycentric coordinates of a triangle.
inline std::array<Eigen::Vector2d, 3> barycentric_gradients(Point2 p0, Point2 p1, Point2 p2)
{
    const double two_a = cross(p1 - p0, p2 - p0);
    return {Eigen::Vector2d((p1.y - p2.y) / two_a, (p2.x - p1.x) / two_a),
            Eigen::Vector2d((p2.y - p0.y) / two_a, (p0.x - p2.x) / two_a),
            Eigen::Vector2d((p0.y - p1.y) / two_a, (p1.x - p0.x) / two_a)};
}

/// Local matrix K(i, j) = a(phi_j, phi_i) using the edge-midpoint rule
/// (exact for polynomial integrands of degree 2). min_eig receives the
/// smallest coercivity eigenvalue seen at the quadrature points.
inline Eigen::Matrix3d local_system_matrix(Point2 p0, Point2 p1, Point2 p2, const Coefficients& c,
                                           double* min_eig = nullptr)
{
    const auto g = barycentric_gradients(p0, p1, p2);
    const double area = 0.5 * std::abs(cross(p1 - p0, p2 - p0));
    const std::array<Point2, 3> pts{0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)};
    // basis values at the edge midpoints
    const double phi[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
    Eigen::Matrix3d k = Eigen::Matrix3d::Zero();
    for (int q = 0; q < 3; ++q) {
        const Eigen::Matrix2d a1 = c.a1(pts[q]);
        const double e = min_symmetric_eigenvalue(a1);
        if (!(e > 0.0))
            throw CoercivityError(pts[q], e);
        if (min_eig)
            *min_eig = std::min(*min_eig, e);
        const Eigen::Vector2d a2 = c.a2(pts[q]);
        const double a3 = c.a3(pts[q]);
        const double w = area / 3.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                k(i, j) += w * ((a1 * g[j]).dot(g[i]) + a2.dot(g[j]) * phi[q][i] + a3 * phi[q][j] * phi[q][i]);
    }
    return k;
}

inline Eigen::Matrix3d local_mass(double area)
{
    Eigen::Matrix3d m;
    m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    return (area / 12.0) * m;
}

inline Eigen::Matrix3d local_stiffness(Point2 p0, Point2 p1, Point2 p2)
{
    const auto g = barycentric_gradients(p0, p1, p2);
    const double area = 0.5 * std::abs(cross(p1 - p0, p2 - p0));
    Eigen::Matrix3d k;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            k(i, j) = area * g[i].dot(g[j]);
    return k;
}

inline std::array<Point2, 3> element_points(const Mesh& mesh, std::size_t t)
{
    const auto& v = mesh.element(t).vertex_ids;
    return {mesh.nodes()[v[0]], mesh.nodes()[v[1]], mesh.nodes()[v[2]]};
}

//
// global assembly
//

struct AssembledSystem
{
    SparseMatrix matrix;           // A(m, n) = a(phi_n, phi_m)
    DofMap dofs;
    double min_coercivity = 0.0;   // smallest eigenvalue of sym(a1) seen
};

inline AssembledSystem assemble_system(const Mesh& mesh, const Coefficients& coeffs)
{
    AssembledSystem out;
    out.dofs = make_dofmap(mesh);
    out.min_coercivity = std::numeric_limits<double>::infinity();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.num_elements());
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const auto p = element_points(mesh, t);
        const auto k = local_system_matrix(p[0], p[1], p[2], coeffs, &out.min_coercivity);
        const auto& vid = mesh.element(t).vertex_ids;
        for (int i = 0; i < 3; ++i) {
            const auto m = out.dofs.dof(vid[i]);
            if (m < 0)
                continue;
            for (int j = 0; j < 3; ++j) {
                const auto n = out.dofs.dof(vid[j]);
                if (n >= 0)
                    trip.emplace_back(int(m), int(n), k(i, j));
            }
        }
    }
    const int n = int(out.dofs.size());
    out.matrix.resize(n, n);
    out.matrix.setFromTriplets(trip.begin(), trip.end());
    // drop a pair only when both (m,n) and (n,m) vanish, keeping the pattern symmetric
    const SparseMatrix sym = SparseMatrix(out.matrix.cwiseAbs()) + SparseMatrix(out.matrix.transpose()).cwiseAbs();
    out.matrix.prune([&](Eigen::Index i, Eigen::Index j, double v) { return v != 0.0 || sym.coeff(i, j) != 0.0; });
    out.matrix.makeCompressed();
    return out;
}

/// Mass and H1-seminorm matrices on the full (boundary-included) P1 space.
struct NormMatrices
{
    SparseMatrix mass;
    SparseMatrix stiffness;
};

inline NormMatrices assemble_norm_matrices(const Mesh& mesh)
{
    std::vector<Eigen::Triplet<double>> tm, tk;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const auto p = element_points(mesh, t);
        const auto m = local_mass(mesh.element(t).area);
        const auto k = local_stiffness(p[0], p[1], p[2]);
        const auto& v = mesh.element(t).vertex_ids;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                tm.emplace_back(int(v[i]), int(v[j]), m(i, j));
                tk.emplace_back(int(v[i]), int(v[j]), k(i, j));
            }
    }
    NormMatrices out;
    const int n = int(mesh.num_nodes());
    out.mass.resize(n, n);
    out.stiffness.resize(n, n);
    out.mass.setFromTriplets(tm.begin(), tm.end());
    out.stiffness.setFromTriplets(tk.begin(), tk.end());
    return out;
}

/// Nodal coefficient vector (all mesh nodes) of a conforming P1 function.
using NodalFunction = Vector;

inline NodalFunction dofs_to_nodal(const Mesh& mesh, const DofMap& dofs, const Vector& x)
{
    NodalFunction u = NodalFunction::Zero(Eigen::Index(mesh.num_nodes()));
    for (std::size_t k = 0; k < dofs.size(); ++k)
        u(Eigen::Index(dofs.dof_to_node[k])) = x(Eigen::Index(k));
    return u;
}

inline Vector nodal_to_dofs(const DofMap& dofs, const NodalFunction& u)
{
    Vector x(Eigen::Index(dofs.size()));
    for (std::size_t k = 0; k < dofs.size(); ++k)
        x(Eigen::Index(k)) = u(Eigen::Index(dofs.dof_to_node[k]));
    return x;
}

/// Squared L2 norm of a conforming P1 function over the elements of b.
inline double l2_norm_sq(const Mesh& mesh, const NodalFunction& u, const Cluster& b)
{
    double s = 0;
    for (auto t : b) {
        const auto& v = mesh.element(t).vertex_ids;
        const Eigen::Vector3d ut(u(Eigen::Index(v[0])), u(Eigen::Index(v[1])), u(Eigen::Index(v[2])));
        s += ut.dot(local_mass(mesh.element(t).area) * ut);
    }
    return s;
}

/// Squared H1 seminorm of a conforming P1 function over the elements of b.
inline double h1_semi_sq(const Mesh& mesh, const NodalFunction& u, const Cluster& b)
{
    double s = 0;
    for (auto t : b) {
        const auto p = element_points(mesh, t);
        const auto& v = mesh.element(t).vertex_ids;
        const Eigen::Vector3d ut(u(Eigen::Index(v[0])), u(Eigen::Index(v[1])), u(Eigen::Index(v[2])));
        s += ut.dot(local_stiffness(p[0], p[1], p[2]) * ut);
    }
    return s;
}

//
// element-wise (discontinuous) polynomials up to degree 2
//

namespace detail {

// integral over T of z0^a z1^b z2^c, divided by |T|
inline double bary_moment(int a, int b, int c)
{
    auto fact = [](int n) {
        double f = 1;
        for (int i = 2; i <= n; ++i)
            f *= i;
        return f;
    };
    return 2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
}

// P2 Lagrange basis as barycentric polynomials: terms (coef, exponents).
struct BaryTerm
{
    double coef;
    std::array<int, 3> exp;
};

inline std::vector<BaryTerm> p2_basis(int k)
{
    auto e = [](int i) {
        std::array<int, 3> x{0, 0, 0};
        x[i] = 1;
        return x;
    };
    auto e2 = [](int i, int j) {
        std::array<int, 3> x{0, 0, 0};
        ++x[i];
        ++x[j];
        return x;
    };
    static constexpr int edge[3][2] = {{0, 1}, {1, 2}, {2, 0}};
    if (k < 3)
        return {{2.0, e2(k, k)}, {-1.0, e(k)}};
    return {{4.0, e2(edge[k - 3][0], edge[k - 3][1])}};
}

inline double product_moment(const std::vector<BaryTerm>& f, const std::vector<BaryTerm>& g)
{
    double s = 0;
    for (const auto& a : f)
        for (const auto& b : g)
            s += a.coef * b.coef * bary_moment(a.exp[0] + b.exp[0], a.exp[1] + b.exp[1], a.exp[2] + b.exp[2]);
    return s;
}

// (1/|T|) * integral of psi_q * zeta_i  (P2 Lagrange psi_q, barycentric zeta_i)
inline const Eigen::Matrix<double, 6, 3>& p2_p1_moments()
{
    static const Eigen::Matrix<double, 6, 3> m = [] {
        Eigen::Matrix<double, 6, 3> r;
        for (int q = 0; q < 6; ++q)
            for (int i = 0; i < 3; ++i) {
                std::array<int, 3> x{0, 0, 0};
                x[i] = 1;
                r(q, i) = product_moment(p2_basis(q), {{1.0, x}});
            }
        return r;
    }();
    return m;
}

// (1/|T|) * P2 Lagrange mass matrix
inline const Eigen::Matrix<double, 6, 6>& p2_moments()
{
    static const Eigen::Matrix<double, 6, 6> m = [] {
        Eigen::Matrix<double, 6, 6> r;
        for (int q = 0; q < 6; ++q)
            for (int s = 0; s < 6; ++s)
                r(q, s) = product_moment(p2_basis(q), p2_basis(s));
        return r;
    }();
    return m;
}

} // namespace detail

/// Discontinuous piecewise polynomial of degree <= 2, stored per element as
/// P2 Lagrange values: vertices 0,1,2 then midpoints of edges 01, 12, 20.
struct ElementwiseFunction
{
    std::vector<std::array<double, 6>> values;

    static ElementwiseFunction zero(const Mesh& mesh)
    {
        return {std::vector<std::array<double, 6>>(mesh.num_elements(), std::array<double, 6>{})};
    }

    void set_linear(std::size_t t, double v0, double v1, double v2)
    {
        values[t] = {v0, v1, v2, 0.5 * (v0 + v1), 0.5 * (v1 + v2), 0.5 * (v2 + v0)};
    }

    static ElementwiseFunction from_nodal(const Mesh& mesh, const NodalFunction& u)
    {
        auto f = zero(mesh);
        for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
            const auto& v = mesh.element(t).vertex_ids;
            f.set_linear(t, u(Eigen::Index(v[0])), u(Eigen::Index(v[1])), u(Eigen::Index(v[2])));
        }
        return f;
    }

    /// Elements where the function is not identically zero.
    Cluster support() const
    {
        std::vector<std::size_t> ids;
        for (std::size_t t = 0; t < values.size(); ++t)
            for (double x : values[t])
                if (x != 0.0) {
                    ids.push_back(t);
                    break;
                }
        return Cluster(std::move(ids));
    }
};

inline double l2_norm(const Mesh& mesh, const ElementwiseFunction& f)
{
    double s = 0;
    const auto& m = detail::p2_moments();
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const Eigen::Map<const Eigen::Matrix<double, 6, 1>> v(f.values[t].data());
        s += mesh.element(t).area * v.dot(m * v);
    }
    return std::sqrt(std::max(0.0, s));
}

/// Integrals of f against the three barycentric functions of element t.
inline Eigen::Vector3d element_load(const Mesh& mesh, const ElementwiseFunction& f, std::size_t t)
{
    const Eigen::Map<const Eigen::Matrix<double, 6, 1>> v(f.values[t].data());
    return mesh.element(t).area * (detail::p2_p1_moments().transpose() * v);
}

/// b_m = <f, phi_m> over interior hat functions.
inline Vector load_vector(const Mesh& mesh, const DofMap& dofs, const ElementwiseFunction& f)
{
    Vector b = Vector::Zero(Eigen::Index(dofs.size()));
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const auto l = element_load(mesh, f, t);
        const auto& v = mesh.element(t).vertex_ids;
        for (int i = 0; i < 3; ++i)
            if (auto m = dofs.dof(v[i]); m >= 0)
                b(m) += l(i);
    }
    return b;
}

//
// dual system
//

/// lambda_n = |det DF_{T_n}|^{-1} sum_i coeffs[n][i] (phi_i o F^{-1}) on the
/// carrier element T_n, zero elsewhere.
struct DualSystem
{
    std::vector<std::size_t> carrier;                 // T_n
    std::vector<int> local_index;                     // l(n, T_n)
    std::vector<std::array<double, 3>> coeffs;        // c_{n,1..3}

    std::size_t size() const { return carrier.size(); }
};

/// Reference dual shape coefficients: inverse of the reference P1 mass matrix
/// (1/24)[[2,1,1],[1,2,1],[1,1,2]], i.e. 6 [[3,-1,-1],[-1,3,-1],[-1,-1,3]].
inline Eigen::Matrix3d reference_dual_coefficients()
{
    return (local_mass(0.5)).inverse();
}

inline DualSystem build_dual_system(const Mesh& mesh, const DofMap& dofs)
{
    const Eigen::Matrix3d c = reference_dual_coefficients();
    DualSystem d;
    d.carrier.resize(dofs.size());
    d.local_index.resize(dofs.size());
    d.coeffs.resize(dofs.size());
    for (std::size_t n = 0; n < dofs.size(); ++n) {
        const std::size_t node = dofs.dof_to_node[n];
        const auto elems = mesh.node_elements(node);
        if (elems.empty())
            throw InvalidInput("dual system: node " + std::to_string(node) + " has no incident element");
        const std::size_t t = *std::min_element(elems.begin(), elems.end());
        const auto& v = mesh.element(t).vertex_ids;
        const int l = int(std::find(v.begin(), v.end(), node) - v.begin());
        d.carrier[n] = t;
        d.local_index[n] = l;
        d.coeffs[n] = {c(l, 0), c(l, 1), c(l, 2)};
    }
    return d;
}

/// Lambda x = sum_n x_n lambda_n as an element-wise linear function.
inline ElementwiseFunction apply_Lambda(const Mesh& mesh, const DualSystem& dual, const Vector& x)
{
    auto f = ElementwiseFunction::zero(mesh);
    std::vector<std::array<double, 3>> lin(mesh.num_elements(), {0.0, 0.0, 0.0});
    for (std::size_t n = 0; n < dual.size(); ++n) {
        const double xn = x(Eigen::Index(n));
        if (xn == 0.0)
            continue;
        const std::size_t t = dual.carrier[n];
        const double s = xn / (2.0 * mesh.element(t).area);
        for (int i = 0; i < 3; ++i)
            lin[t][std::size_t(i)] += s * dual.coeffs[n][std::size_t(i)];
    }
    for (std::size_t t = 0; t < mesh.num_elements(); ++t)
        if (lin[t] != std::array<double, 3>{0.0, 0.0, 0.0})
            f.set_linear(t, lin[t][0], lin[t][1], lin[t][2]);
    return f;
}

/// (Lambda^T v)_n = <v, lambda_n>, exact for element-wise polynomials of degree <= 2.
inline Vector apply_LambdaT(const Mesh& mesh, const DualSystem& dual, const ElementwiseFunction& v)
{
    Vector out(Eigen::Index(dual.size()));
    for (std::size_t n = 0; n < dual.size(); ++n) {
        const std::size_t t = dual.carrier[n];
        const auto l = element_load(mesh, v, t);
        const auto& c = dual.coeffs[n];
        out(Eigen::Index(n)) = (c[0] * l(0) + c[1] * l(1) + c[2] * l(2)) / (2.0 * mesh.element(t).area);
    }
    return out;
}

/// max_{n,m} |<phi_n, lambda_m> - delta_nm|. Only pairs with T_m in supp(phi_n)
/// can be nonzero, so the scan is local.
inline double duality_error(const Mesh& mesh, const DofMap& dofs, const DualSystem& dual)
{
    double err = 0;
    for (std::size_t m = 0; m < dual.size(); ++m) {
        const std::size_t t = dual.carrier[m];
        const auto& vid = mesh.element(t).vertex_ids;
        const Eigen::Matrix3d mass = local_mass(mesh.element(t).area);
        const Eigen::Vector3d c(dual.coeffs[m][0], dual.coeffs[m][1], dual.coeffs[m][2]);
        const Eigen::Vector3d g = mass * c / (2.0 * mesh.element(t).area);
        for (int i = 0; i < 3; ++i) {
            const auto n = dofs.dof(vid[i]);
            if (n < 0)
                continue;
            const double expect = std::size_t(n) == m ? 1.0 : 0.0;
            err = std::max(err, std::abs(g(i) - expect));
        }
    }
    return err;
}

/// Operator norm of Lambda: R^N -> L2. Supports of lambda_m on distinct
/// carriers are disjoint, so the norm is the max over elements of the local Gram norm.
inline double lambda_operator_norm(const Mesh& mesh, const DualSystem& dual)
{
    std::vector<std::vector<std::size_t>> by_elem(mesh.num_elements());
    for (std::size_t n = 0; n < dual.size(); ++n)
        by_elem[dual.carrier[n]].push_back(n);
    double best = 0;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const auto& ms = by_elem[t];
        if (ms.empty())
            continue;
        const double area = mesh.element(t).area;
        const Eigen::Matrix3d mass = local_mass(area);
        Eigen::MatrixXd g(ms.size(), ms.size());
        for (std::size_t a = 0; a < ms.size(); ++a)
            for (std::size_t b = 0; b < ms.size(); ++b) {
                const Eigen::Vector3d ca(dual.coeffs[ms[a]][0], dual.coeffs[ms[a]][1], dual.coeffs[ms[a]][2]);
                const Eigen::Vector3d cb(dual.coeffs[ms[b]][0], dual.coeffs[ms[b]][1], dual.coeffs[ms[b]][2]);
                g(Eigen::Index(a), Eigen::Index(b)) = ca.dot(mass * cb) / (4.0 * area * area);
            }
        best = std::max(best, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().maxCoeff());
    }
    return std::sqrt(best);
}

/// ||lambda_m||_{L2}
inline double dual_norm(const Mesh& mesh, const DualSystem& dual, std::size_t m)
{
    const double area = mesh.element(dual.carrier[m]).area;
    const Eigen::Vector3d c(dual.coeffs[m][0], dual.coeffs[m][1], dual.coeffs[m][2]);
    return std::sqrt(c.dot(local_mass(area) * c)) / (2.0 * area);
}

//
// discrete solution operator
//

/// Sparse LU of the system matrix with a residual check after every solve.
class DiscreteSolver
{
public:
    static constexpr double residual_tolerance = 1e-12;

    explicit DiscreteSolver(const SparseMatrix& a) : a_(a)
    {
        lu_.analyzePattern(a_);
        lu_.factorize(a_);
        if (lu_.info() != Eigen::Success)
            throw NumericalError("sparse LU factorization failed: " + lu_.lastErrorMessage());
    }

    Vector solve(const Vector& b) const
    {
        const double nb = b.norm();
        if (nb == 0.0)
            return Vector::Zero(b.size());
        Vector u = lu_.solve(b);
        const double res = (a_ * u - b).norm() / nb;
        if (!(res <= residual_tolerance))
            throw NumericalError("solve residual " + std::to_string(res) + " exceeds tolerance");
        return u;
    }

    const SparseMatrix& matrix() const { return a_; }

private:
    SparseMatrix a_;
    // SparseLU::solve is logically const but not marked so
    mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

struct DiscreteSolution
{
    Vector coefficients;       // u in the hat basis
    double apriori_ratio = 0;  // ||u||_{H1} / ||f||_{L2}
};

/// u with a(u, phi_m) = <f, phi_m> for all m.
inline DiscreteSolution discrete_solution(const DiscreteSolver& solver, const Mesh& mesh, const DofMap& dofs,
                                          const ElementwiseFunction& f, const NormMatrices* norms = nullptr)
{
    DiscreteSolution s;
    s.coefficients = solver.solve(load_vector(mesh, dofs, f));
    if (norms) {
        const NodalFunction u = dofs_to_nodal(mesh, dofs, s.coefficients);
        const double h1 = std::sqrt(u.dot(norms->mass * u) + u.dot(norms->stiffness * u));
        const double nf = l2_norm(mesh, f);
        s.apriori_ratio = nf > 0 ? h1 / nf : 0.0;
    }
    return s;
}

/// max over random f of ||A^{-1} f - Lambda^T S Lambda f|| / ||A^{-1} f||.
inline double representation_residual(const DiscreteSolver& solver, const Mesh& mesh, const DofMap& dofs,
                                       const DualSystem& dual, std::size_t trial_count, std::uint64_t seed = 1)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    double worst = 0;
    for (std::size_t k = 0; k < trial_count; ++k) {
        Vector f(Eigen::Index(dofs.size()));
        for (auto& x : f)
            x = gauss(rng);
        const Vector direct = solver.solve(f);
        const ElementwiseFunction lf = apply_Lambda(mesh, dual, f);
        const Vector u = discrete_solution(solver, mesh, dofs, lf).coefficients;
        const Vector back = apply_LambdaT(mesh, dual, ElementwiseFunction::from_nodal(mesh, dofs_to_nodal(mesh, dofs, u)));
        const double nd = direct.norm();
        if (nd > 0)
            worst = std::max(worst, (direct - back).norm() / nd);
    }
    return worst;
}

//
// export
//

/// One "row col value" line per stored entry, sorted by (row, col).
inline void write_matrix(std::ostream& os, const SparseMatrix& a)
{
    const Eigen::SparseMatrix<double, Eigen::RowMajor> r(a);
    for (Eigen::Index i = 0; i < r.outerSize(); ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(r, i); it; ++it)
            os << it.row() << " " << it.col() << " " << detail::sci17(it.value()) << "\n";
}

} // namespace hmfem
