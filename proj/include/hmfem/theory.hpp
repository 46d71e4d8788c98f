#pragma once

// Local machinery behind the rank bounds: quasi-interpolation, discrete
// cut-off functions and operators, locally discrete harmonic spaces, and
// the interior (Caccioppoli) estimate, all evaluated numerically.

#include <hmfem/detail/common.hpp>
#include <hmfem/fem.hpp>
#include <hmfem/geometry.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <span>
#include <sstream>
#include <vector>

namespace hmfem {

//
// Clement operator
//

/// Nodal average of the element means over each node patch; defined on all
/// nodes, boundary included.
inline NodalFunction clement(const Mesh& mesh, std::span<const double> element_means)
{
    detail::require(element_means.size() == mesh.num_elements(), "clement: need one value per element");
    NodalFunction out(Eigen::Index(mesh.num_nodes()));
    for (std::size_t v = 0; v < mesh.num_nodes(); ++v) {
        const auto elems = mesh.node_elements(v);
        double s = 0;
        for (auto t : elems)
            s += element_means[t];
        out(Eigen::Index(v)) = s / double(elems.size());
    }
    return out;
}

/// Elements on which a conforming P1 function is not identically zero.
inline Cluster element_support(const Mesh& mesh, const NodalFunction& u)
{
    detail::require(std::size_t(u.size()) == mesh.num_nodes(), "element_support: size mismatch");
    std::vector<std::size_t> ids;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t)
        for (auto v : mesh.element(t).vertex_ids)
            if (u(Eigen::Index(v)) != 0.0) {
                ids.push_back(t);
                break;
            }
    return Cluster(std::move(ids));
}

/// |grad u| on element t.
inline double element_gradient_norm(const Mesh& mesh, const NodalFunction& u, std::size_t t)
{
    const auto p = element_points(mesh, t);
    const auto g = barycentric_gradients(p[0], p[1], p[2]);
    const auto& v = mesh.element(t).vertex_ids;
    // differences against vertex 0: exact zero on constants
    const double u0 = u(Eigen::Index(v[0]));
    const Eigen::Vector2d grad = (u(Eigen::Index(v[1])) - u0) * g[1] + (u(Eigen::Index(v[2])) - u0) * g[2];
    return grad.norm();
}

inline double sup_gradient(const Mesh& mesh, const NodalFunction& u)
{
    double s = 0;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t)
        s = std::max(s, element_gradient_norm(mesh, u, t));
    return s;
}

//
// cut-off function and operator
//

class CutoffPreconditionError : public InvalidInput
{
public:
    CutoffPreconditionError(const std::string& what, double h_max, double required)
        : InvalidInput(what), h_max(h_max), required(required)
    {
    }
    double h_max;     // measured h_max(B^delta)
    double required;  // smallest admissible delta for that width
};

/// kappa = J(step), step(T) = max(0, 1 - dist(T, patch(B)) / eps), eps = delta / 2.
/// The support inclusion supp(kappa) in B^delta holds whenever
/// delta >= 4 c_nb h_max(B^delta), c_nb the mesh's neighbor constant: a
/// supporting element T touches some S with dist(S, patch(B)) < eps, and
/// dist(T, B) <= c_nb h(S) + eps + c_nb h(B).
struct CutoffFunction
{
    NodalFunction values;
    Cluster cluster;    // B
    Cluster inflated;   // B^delta
    double delta = 0;
    double epsilon = 0;
    double h_max = 0;   // h_max(B^delta)
};

inline double cutoff_required_delta(const Mesh& mesh, double h_max) { return 4.0 * mesh.neighbor_constant() * h_max; }

inline CutoffFunction cutoff_function(const Mesh& mesh, const Cluster& b, double delta)
{
    detail::require(!b.empty(), "cutoff_function: cluster must be nonempty");
    detail::require(delta > 0.0, "cutoff_function: delta must be positive");
    CutoffFunction c;
    c.cluster = b;
    c.delta = delta;
    c.epsilon = 0.5 * delta;
    c.inflated = inflate(mesh, b, delta);
    c.h_max = cluster_h_max(mesh, c.inflated);

    const double diam_omega =
        mesh.domain() ? domain_diameter(*mesh.domain()) : detail::point_set_diameter(mesh.nodes());
    const double need = cutoff_required_delta(mesh, c.h_max);
    if (delta < need || delta > diam_omega) {
        std::ostringstream os;
        os << "cutoff_function: delta = " << delta << " outside [" << need << ", " << diam_omega
           << "]; measured h_max(B^delta) = " << c.h_max;
        throw CutoffPreconditionError(os.str(), c.h_max, need);
    }

    const Cluster pb = patch(mesh, b);
    std::vector<Point2> centers;
    for (auto s : pb)
        centers.push_back(mesh.element(s).incenter);
    std::vector<double> step(mesh.num_elements(), 0.0);
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        if (pb.contains(t)) {
            step[t] = 1.0;
            continue;
        }
        double d = std::numeric_limits<double>::infinity();
        const Point2 x = mesh.element(t).incenter;
        for (const auto& q : centers)
            d = std::min(d, distance(x, q));
        step[t] = std::max(0.0, 1.0 - d / c.epsilon);
    }
    c.values = clement(mesh, step);
    return c;
}

/// K u = nodal interpolant of kappa * u.
inline NodalFunction cutoff_operator(const CutoffFunction& kappa, const NodalFunction& u)
{
    detail::require(u.size() == kappa.values.size(), "cutoff_operator: size mismatch");
    return kappa.values.cwiseProduct(u);
}

inline NodalFunction cutoff_operator(const Mesh& mesh, const Cluster& b, double delta, const NodalFunction& u)
{
    return cutoff_operator(cutoff_function(mesh, b, delta), u);
}

/// max over T of (||Ku||_T + delta |Ku|_T) / (||u||_T + delta |u|_T), skipping
/// elements where u vanishes.
inline double cutoff_stability_constant(const Mesh& mesh, double delta, const NodalFunction& u, const NodalFunction& ku)
{
    double c = 0;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const Cluster one(std::vector<std::size_t>{t});
        const double den = std::sqrt(l2_norm_sq(mesh, u, one)) + delta * std::sqrt(h1_semi_sq(mesh, u, one));
        if (den == 0.0)
            continue;
        const double num = std::sqrt(l2_norm_sq(mesh, ku, one)) + delta * std::sqrt(h1_semi_sq(mesh, ku, one));
        c = std::max(c, num / den);
    }
    return c;
}

/// max over T of h(T) |v|_{H1(T)} / ||v||_{L2(T)}, skipping elements where v vanishes.
inline double inverse_inequality_ratio(const Mesh& mesh, const NodalFunction& v)
{
    detail::require(std::size_t(v.size()) == mesh.num_nodes(), "inverse_inequality_ratio: size mismatch");
    double r = 0;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const Cluster one(std::vector<std::size_t>{t});
        const double l2 = std::sqrt(l2_norm_sq(mesh, v, one));
        if (l2 == 0.0)
            continue;
        const double semi = element_gradient_norm(mesh, v, t) * std::sqrt(mesh.element(t).area);
        r = std::max(r, mesh.element(t).width * semi / l2);
    }
    return r;
}

//
// locally discrete harmonic functions
//

/// J_B: DOFs whose hat function is supported inside B.
inline std::vector<std::size_t> interior_dofs(const Mesh& mesh, const DofMap& dofs, const Cluster& b)
{
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < dofs.size(); ++k) {
        const auto elems = mesh.node_elements(dofs.dof_to_node[k]);
        if (std::all_of(elems.begin(), elems.end(), [&](std::size_t t) { return b.contains(t); }))
            out.push_back(k);
    }
    return out;
}

/// max over j in J of |(A u)_j|.
inline double harmonic_residual(const SparseMatrix& a, const std::vector<std::size_t>& constrained, const Vector& u)
{
    const Vector au = a * u;
    double r = 0;
    for (auto j : constrained)
        r = std::max(r, std::abs(au(Eigen::Index(j))));
    return r;
}

struct HarmonicBasis
{
    Cluster cluster;
    std::vector<std::size_t> constrained;  // J_B
    DenseMatrix basis;                     // N x (N - |J_B|), DOF coefficients
    bool trivial = false;                  // J_B empty: identity basis

    std::size_t dimension() const { return std::size_t(basis.cols()); }
};

namespace detail {

// Splits u = (u_F, u_J) and solves A_JJ u_J = -A_JF u_F for each unit u_F.
// Rows and columns index into `vars`; returns |vars| x |free| coefficients.
inline DenseMatrix harmonic_extension(const SparseMatrix& a, const std::vector<std::size_t>& vars,
                                      const std::vector<std::size_t>& constrained)
{
    std::vector<int> role(std::size_t(a.rows()), -1);  // -1 outside, 0 free, 1 constrained
    for (auto v : vars)
        role[v] = 0;
    for (auto j : constrained)
        role[j] = 1;
    std::vector<std::size_t> free, cons;
    for (auto v : vars)
        (role[v] == 1 ? cons : free).push_back(v);
    std::vector<Eigen::Index> pos(std::size_t(a.rows()), -1);
    for (std::size_t k = 0; k < free.size(); ++k)
        pos[free[k]] = Eigen::Index(k);
    for (std::size_t k = 0; k < cons.size(); ++k)
        pos[cons[k]] = Eigen::Index(k);

    DenseMatrix z = DenseMatrix::Zero(Eigen::Index(vars.size()), Eigen::Index(free.size()));
    std::vector<Eigen::Index> var_pos(std::size_t(a.rows()), -1);
    for (std::size_t k = 0; k < vars.size(); ++k)
        var_pos[vars[k]] = Eigen::Index(k);
    for (std::size_t k = 0; k < free.size(); ++k)
        z(var_pos[free[k]], Eigen::Index(k)) = 1.0;
    if (cons.empty() || free.empty())
        return z;

    std::vector<Eigen::Triplet<double>> jj, jf;
    for (Eigen::Index c = 0; c < a.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(a, c); it; ++it) {
            const auto r = std::size_t(it.row()), col = std::size_t(it.col());
            if (role[r] != 1 || role[col] < 0)
                continue;
            (role[col] == 1 ? jj : jf).emplace_back(pos[r], pos[col], it.value());
        }
    SparseMatrix ajj(Eigen::Index(cons.size()), Eigen::Index(cons.size()));
    SparseMatrix ajf(Eigen::Index(cons.size()), Eigen::Index(free.size()));
    ajj.setFromTriplets(jj.begin(), jj.end());
    ajf.setFromTriplets(jf.begin(), jf.end());
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(ajj);
    if (lu.info() != Eigen::Success)
        throw NumericalError("harmonic_extension: constrained block is singular");
    const DenseMatrix rhs = -DenseMatrix(ajf);
    const DenseMatrix uj = lu.solve(rhs);
    for (std::size_t k = 0; k < cons.size(); ++k)
        z.row(var_pos[cons[k]]) = uj.row(Eigen::Index(k));
    return z;
}

// Columns of z made orthonormal in the inner product g.
inline DenseMatrix orthonormalize(const DenseMatrix& z, const DenseMatrix& gram)
{
    Eigen::LLT<DenseMatrix> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericalError("orthonormalize: Gram matrix is not positive definite");
    return llt.matrixU().solve<Eigen::OnTheRight>(z);
}

} // namespace detail

/// Basis of { u : (A u)_j = 0 for all j in J_B }, orthonormal in the L2 inner
/// product on Omega.
inline HarmonicBasis harmonic_basis(const Mesh& mesh, const SparseMatrix& a, const DofMap& dofs, const Cluster& b)
{
    detail::require(std::size_t(a.rows()) == dofs.size() && a.rows() == a.cols(), "harmonic_basis: size mismatch");
    HarmonicBasis h;
    h.cluster = b;
    h.constrained = interior_dofs(mesh, dofs, b);
    const std::size_t n = dofs.size();
    if (h.constrained.empty()) {
        h.trivial = true;
        h.basis = DenseMatrix::Identity(Eigen::Index(n), Eigen::Index(n));
        return h;
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const DenseMatrix z = detail::harmonic_extension(a, all, h.constrained);
    if (z.cols() == 0) {
        h.basis = z;
        return h;
    }
    const SparseMatrix full_mass = assemble_norm_matrices(mesh).mass;
    SparseMatrix m{Eigen::Index(n), Eigen::Index(n)};
    {
        std::vector<Eigen::Triplet<double>> trip;
        for (Eigen::Index c = 0; c < full_mass.outerSize(); ++c)
            for (SparseMatrix::InnerIterator it(full_mass, c); it; ++it) {
                const auto i = dofs.node_to_dof[std::size_t(it.row())], j = dofs.node_to_dof[std::size_t(it.col())];
                if (i >= 0 && j >= 0)
                    trip.emplace_back(i, j, it.value());
            }
        m.setFromTriplets(trip.begin(), trip.end());
    }
    const DenseMatrix gram = z.transpose() * (m * z);
    h.basis = detail::orthonormalize(z, gram);
    return h;
}

//
// discrete Caccioppoli inequality
//

struct CaccioppoliResult
{
    double max_ratio = 0;         // max over u of delta |u|_{H1(B)} / ||u||_{L2(B^delta)}
    std::size_t dimension = 0;    // of the trace space on the nodes of B^delta
    std::size_t constrained = 0;  // |J_{B^delta}|
};

namespace detail {

struct LocalHarmonicSpace
{
    Cluster inflated;
    std::vector<std::size_t> vars;  // DOFs at nodes of B^delta
    std::vector<std::size_t> constrained;
    DenseMatrix z;                  // |vars| x dim
};

// Only values at nodes of B^delta enter either norm, and every constraint row
// j in J_{B^delta} couples only such nodes, so the harmonic space restricted to
// those nodes is the null space of A_{J, vars}.
inline LocalHarmonicSpace local_harmonic_space(const Mesh& mesh, const SparseMatrix& a, const DofMap& dofs,
                                               const Cluster& inflated)
{
    LocalHarmonicSpace s;
    s.inflated = inflated;
    std::vector<bool> seen(dofs.size(), false);
    for (auto t : inflated)
        for (auto v : mesh.element(t).vertex_ids) {
            const auto d = dofs.node_to_dof[v];
            if (d >= 0 && !seen[std::size_t(d)]) {
                seen[std::size_t(d)] = true;
                s.vars.push_back(std::size_t(d));
            }
        }
    std::sort(s.vars.begin(), s.vars.end());
    s.constrained = interior_dofs(mesh, dofs, inflated);
    s.z = harmonic_extension(a, s.vars, s.constrained);
    return s;
}

// Element matrices summed over `elems`, in local numbering of `vars`.
template <class Local>
SparseMatrix local_gram(const Mesh& mesh, const DofMap& dofs, const std::vector<std::size_t>& vars,
                        const Cluster& elems, Local local)
{
    std::vector<Eigen::Index> pos(dofs.size(), -1);
    for (std::size_t k = 0; k < vars.size(); ++k)
        pos[vars[k]] = Eigen::Index(k);
    std::vector<Eigen::Triplet<double>> trip;
    for (auto t : elems) {
        const Eigen::Matrix3d k = local(t);
        const auto& v = mesh.element(t).vertex_ids;
        std::array<Eigen::Index, 3> loc{};
        for (int i = 0; i < 3; ++i) {
            const auto d = dofs.node_to_dof[v[std::size_t(i)]];
            loc[std::size_t(i)] = d < 0 ? -1 : pos[std::size_t(d)];
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (loc[std::size_t(i)] >= 0 && loc[std::size_t(j)] >= 0)
                    trip.emplace_back(loc[std::size_t(i)], loc[std::size_t(j)], k(i, j));
    }
    SparseMatrix g{Eigen::Index(vars.size()), Eigen::Index(vars.size())};
    g.setFromTriplets(trip.begin(), trip.end());
    return g;
}

} // namespace detail

/// Sharp constant of delta |u|_{H1(B)} <= C ||u||_{L2(B^delta)} over the space
/// harmonic on B^delta, via the generalized eigenproblem of the two Gram
/// matrices restricted to that space.
inline CaccioppoliResult caccioppoli_max_ratio(const Mesh& mesh, const SparseMatrix& a, const DofMap& dofs,
                                               const Cluster& b, double delta)
{
    const CutoffFunction kappa = cutoff_function(mesh, b, delta);  // enforces the precondition
    const auto s = detail::local_harmonic_space(mesh, a, dofs, kappa.inflated);
    CaccioppoliResult r;
    r.dimension = std::size_t(s.z.cols());
    r.constrained = s.constrained.size();
    if (r.dimension == 0)
        return r;
    const SparseMatrix mass = detail::local_gram(mesh, dofs, s.vars, kappa.inflated,
                                                [&](std::size_t t) { return local_mass(mesh.element(t).area); });
    const SparseMatrix stiff = detail::local_gram(mesh, dofs, s.vars, b, [&](std::size_t t) {
        const auto p = element_points(mesh, t);
        return local_stiffness(p[0], p[1], p[2]);
    });
    const DenseMatrix mz = s.z.transpose() * (mass * s.z);
    const DenseMatrix kz = s.z.transpose() * (stiff * s.z);
    Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> ges(0.5 * (kz + kz.transpose()), 0.5 * (mz + mz.transpose()),
                                                               Eigen::EigenvaluesOnly);
    if (ges.info() != Eigen::Success)
        throw NumericalError("caccioppoli_max_ratio: generalized eigenproblem failed");
    r.max_ratio = delta * std::sqrt(std::max(0.0, ges.eigenvalues().maxCoeff()));
    return r;
}

class NotHarmonicError : public InvalidInput
{
public:
    NotHarmonicError(const std::string& what, double residual) : InvalidInput(what), residual(residual) {}
    double residual;
};

/// delta |u|_{H1(B)} / ||u||_{L2(B^delta)} for u (DOF coefficients) harmonic on B^delta.
inline double caccioppoli_ratio(const Mesh& mesh, const SparseMatrix& a, const DofMap& dofs, const Vector& u,
                                const Cluster& b, double delta)
{
    detail::require(std::size_t(u.size()) == dofs.size(), "caccioppoli_ratio: size mismatch");
    const CutoffFunction kappa = cutoff_function(mesh, b, delta);
    const auto cons = interior_dofs(mesh, dofs, kappa.inflated);
    const double res = harmonic_residual(a, cons, u);
    if (res > 1e-8 * std::max(u.norm(), std::numeric_limits<double>::min())) {
        std::ostringstream os;
        os << "caccioppoli_ratio: u is not discrete harmonic on B^delta (residual " << res << ")";
        throw NotHarmonicError(os.str(), res);
    }
    const NodalFunction un = dofs_to_nodal(mesh, dofs, u);
    const double den = std::sqrt(l2_norm_sq(mesh, un, kappa.inflated));
    detail::require(den > 0.0, "caccioppoli_ratio: u vanishes on B^delta");
    return delta * std::sqrt(h1_semi_sq(mesh, un, b)) / den;
}

/// Overwrites the J entries of u so that (A u)_j = 0 for j in J.
inline Vector harmonic_completion(const SparseMatrix& a, const std::vector<std::size_t>& constrained, Vector u)
{
    if (constrained.empty())
        return u;
    std::vector<Eigen::Index> pos(std::size_t(a.rows()), -1);
    for (std::size_t k = 0; k < constrained.size(); ++k)
        pos[constrained[k]] = Eigen::Index(k);
    for (auto j : constrained)
        u(Eigen::Index(j)) = 0.0;
    const Vector au = a * u;
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index c = 0; c < a.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(a, c); it; ++it)
            if (pos[std::size_t(it.row())] >= 0 && pos[std::size_t(it.col())] >= 0)
                trip.emplace_back(pos[std::size_t(it.row())], pos[std::size_t(it.col())], it.value());
    const auto m = Eigen::Index(constrained.size());
    SparseMatrix ajj{m, m};
    ajj.setFromTriplets(trip.begin(), trip.end());
    Vector rhs(m);
    for (std::size_t k = 0; k < constrained.size(); ++k)
        rhs(Eigen::Index(k)) = -au(Eigen::Index(constrained[k]));
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(ajj);
    if (lu.info() != Eigen::Success)
        throw NumericalError("harmonic_completion: constrained block is singular");
    const Vector uj = lu.solve(rhs);
    for (std::size_t k = 0; k < constrained.size(); ++k)
        u(Eigen::Index(constrained[k])) = uj(Eigen::Index(k));
    return u;
}

//
// verification grid
//

/// Elements whose incenter lies within radius of center.
inline Cluster ball_cluster(const Mesh& mesh, Point2 center, double radius)
{
    std::vector<std::size_t> ids;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t)
        if (distance(mesh.element(t).incenter, center) <= radius)
            ids.push_back(t);
    return Cluster(std::move(ids));
}

struct VerificationRow
{
    std::string property;
    int cluster = -1;   // -1: not cluster specific
    double delta = 0;
    int level = 0;
    double measured = 0;
    double limit = 0;
    bool pass = false;
};

struct VerificationConfig
{
    double coarse_width = 0.025;                 // level 0; level 1 halves it
    std::vector<double> delta_factors{6, 12, 24};  // multiples of h on level 0
    std::size_t clusters = 5;
    double radius = 0.08;
    double center_lo = 0.35, center_hi = 0.65;
    std::uint64_t seed = 1;
    double growth_limit = 1.5;
    double residual_limit = 1e-8;
    double inverse_drift_limit = 0.10;
    Coefficients coefficients = Coefficients::convection_diffusion();
};

struct VerificationReport
{
    std::vector<VerificationRow> rows;
    double max_growth = 0;  // Caccioppoli level-1 / level-0 maximum

    bool passed() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const VerificationRow& r) { return r.pass; });
    }
    bool passed(const std::string& property) const
    {
        bool any = false;
        for (const auto& r : rows)
            if (r.property == property) {
                any = true;
                if (!r.pass)
                    return false;
            }
        return any;
    }
};

inline std::vector<Point2> verification_centers(const VerificationConfig& cfg)
{
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(cfg.center_lo, cfg.center_hi);
    std::vector<Point2> out;
    for (std::size_t i = 0; i < cfg.clusters; ++i) {
        const double x = u(rng);
        out.push_back({x, u(rng)});
    }
    return out;
}

/// Runs every property on the (cluster, delta, level) grid. Cells are
/// independent; rows are emitted in grid order.
inline VerificationReport verify_theory(const VerificationConfig& cfg)
{
    detail::require(cfg.coarse_width > 0 && !cfg.delta_factors.empty() && cfg.clusters > 0,
                    "verify_theory: empty grid");
    const auto centers = verification_centers(cfg);
    const std::size_t nd = cfg.delta_factors.size(), nc = centers.size();

    struct Level
    {
        Mesh mesh;
        DofMap dofs;
        SparseMatrix a;
    };
    std::vector<Level> levels;
    for (int l = 0; l < 2; ++l) {
        Mesh m = generate_mesh({Domain::unit_square, std::nullopt, cfg.coarse_width / double(1 << l)});
        auto sys = assemble_system(m, cfg.coefficients);
        levels.push_back({std::move(m), std::move(sys.dofs), std::move(sys.matrix)});
    }
    const double h0 = levels[0].mesh.h_max();

    struct Cell
    {
        std::vector<VerificationRow> rows;
        double cacc = 0;
    };
    std::vector<Cell> cells(2 * nc * nd);
    detail::parallel_for(cells.size(), [&](std::size_t k) {
        const int l = int(k / (nc * nd));
        const std::size_t c = (k / nd) % nc, di = k % nd;
        const Level& lv = levels[std::size_t(l)];
        const double delta = cfg.delta_factors[di] * h0;
        const Cluster b = ball_cluster(lv.mesh, centers[c], cfg.radius);
        auto row = [&](std::string name, double measured, double limit, bool pass) {
            cells[k].rows.push_back({std::move(name), int(c), delta, l, measured, limit, pass});
        };

        const CutoffFunction kappa = cutoff_function(lv.mesh, b, delta);
        const Cluster supp = element_support(lv.mesh, kappa.values);
        double outside = 0;
        for (auto t : supp)
            outside += kappa.inflated.contains(t) ? 0.0 : 1.0;
        row("cutoff_support", outside, 0, outside == 0);
        double one_gap = 0;
        for (auto t : b)
            for (auto v : lv.mesh.element(t).vertex_ids)
                one_gap = std::max(one_gap, std::abs(kappa.values(Eigen::Index(v)) - 1.0));
        row("cutoff_one_on_b", one_gap, 0, one_gap == 0);
        const bool in_range = kappa.values.minCoeff() >= 0.0 && kappa.values.maxCoeff() <= 1.0;
        row("cutoff_range", kappa.values.maxCoeff() - kappa.values.minCoeff(), 1, in_range);
        const double grad = delta * sup_gradient(lv.mesh, kappa.values);
        row("cutoff_gradient_scaled", grad, 0, std::isfinite(grad));

        std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (k + 1)));
        std::normal_distribution<double> g;
        Vector u(Eigen::Index(lv.dofs.size()));
        for (auto& x : u)
            x = g(rng);
        const auto cons_b = interior_dofs(lv.mesh, lv.dofs, b);
        u = harmonic_completion(lv.a, cons_b, std::move(u));
        const NodalFunction un = dofs_to_nodal(lv.mesh, lv.dofs, u);
        const NodalFunction ku = cutoff_operator(kappa, un);
        const double stab = cutoff_stability_constant(lv.mesh, delta, un, ku);
        row("cutoff_operator_stability", stab, 0, std::isfinite(stab));
        const double res = harmonic_residual(lv.a, cons_b, nodal_to_dofs(lv.dofs, ku)) / u.norm();
        row("cutoff_invariance", res, cfg.residual_limit, res <= cfg.residual_limit);

        const auto cr = caccioppoli_max_ratio(lv.mesh, lv.a, lv.dofs, b, delta);
        cells[k].cacc = cr.max_ratio;
        row("caccioppoli_max_ratio", cr.max_ratio, 0, cr.dimension > 0 && std::isfinite(cr.max_ratio));
    });

    VerificationReport rep;
    for (const auto& c : cells)
        rep.rows.insert(rep.rows.end(), c.rows.begin(), c.rows.end());
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t di = 0; di < nd; ++di) {
            const double r0 = cells[c * nd + di].cacc, r1 = cells[nc * nd + c * nd + di].cacc;
            const double growth = r0 > 0 ? r1 / r0 : std::numeric_limits<double>::infinity();
            rep.max_growth = std::max(rep.max_growth, growth);
            rep.rows.push_back({"caccioppoli_growth", int(c), cfg.delta_factors[di] * h0, 1, growth, cfg.growth_limit,
                                growth <= cfg.growth_limit});
        }

    // i.i.d. nodal values: on shape-similar meshes the elementwise ratio has
    // the same supremum, so the sampled maximum should not drift
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> g;
    double inv[2];
    for (int l = 0; l < 2; ++l) {
        const Mesh& m = levels[std::size_t(l)].mesh;
        NodalFunction v(Eigen::Index(m.num_nodes()));
        for (auto& x : v)
            x = g(rng);
        inv[l] = inverse_inequality_ratio(m, v);
        rep.rows.push_back({"inverse_inequality", -1, 0, l, inv[l], 0, std::isfinite(inv[l])});
    }
    const double drift = std::abs(inv[1] / inv[0] - 1.0);
    rep.rows.push_back({"inverse_inequality_drift", -1, 0, 1, drift, cfg.inverse_drift_limit,
                        drift <= cfg.inverse_drift_limit});
    return rep;
}

inline void write_verification_report(std::ostream& os, const VerificationReport& rep)
{
    os << "property cluster delta level measured limit status\n";
    for (const auto& r : rep.rows)
        os << r.property << ' ' << r.cluster << ' ' << detail::sci17(r.delta) << ' ' << r.level << ' '
           << detail::sci17(r.measured) << ' ' << detail::sci17(r.limit) << ' ' << (r.pass ? "PASS" : "FAIL") << '\n';
}

} // namespace hmfem
