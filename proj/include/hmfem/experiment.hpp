#pragma once

// End-to-end drivers: mesh generation report, the compression sweep, and the
// verification suites, all parameterized by one flat configuration.

#include <hmfem/clustering.hpp>
#include <hmfem/fem.hpp>
#include <hmfem/geometry.hpp>
#include <hmfem/hmatrix.hpp>
#include <hmfem/theory.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace hmfem {

struct ExperimentConfig
{
    Domain domain = Domain::lshape;
    double alpha = 5.0;
    double H = 0.06;
    std::vector<Point2> gamma{{0.5, 0.5}};
    std::optional<double> uniform_width;  // set: uniform mesh, grading ignored
    std::string coefficients = "convection";
    double c_adm = 2.0;
    std::size_t c_small = 25;
    std::size_t r_min = 1;
    std::size_t r_max = 40;
    std::size_t budget = default_dense_budget;
    std::uint64_t seed = 1;
    double perturb_dual = 0.0;  // added to one dual coefficient; negative control only

    void validate() const
    {
        detail::require(r_min >= 1 && r_min <= r_max, "config: rank range must satisfy 1 <= r_min <= r_max");
        detail::require(c_adm > 0.0, "config: c_adm must be positive");
        detail::require(c_small >= 1, "config: c_small must be >= 1");
        detail::require(!uniform_width || *uniform_width > 0.0, "config: uniform_width must be positive");
        detail::require(uniform_width || (alpha >= 1.0 && H > 0.0 && !gamma.empty()),
                        "config: grading needs alpha >= 1, H > 0 and at least one gamma point");
    }
};

/// "convection" (alias "paper_s4") or "laplace".
inline Coefficients coefficient_preset(const std::string& name)
{
    if (name == "convection" || name == "paper_s4")
        return Coefficients::convection_diffusion();
    if (name == "laplace")
        return Coefficients::laplace();
    throw InvalidInput("unknown coefficient preset '" + name + "' (expected convection, paper_s4 or laplace)");
}

/// "x,y;x,y;..."
inline std::vector<Point2> parse_points(const std::string& s)
{
    std::vector<Point2> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t end = std::min(s.find(';', start), s.size());
        const std::string item = s.substr(start, end - start);
        const std::size_t comma = item.find(',');
        detail::require(comma != std::string::npos, "point list: expected x,y in '" + item + "'");
        try {
            out.push_back({std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1))});
        } catch (const std::logic_error&) {
            throw InvalidInput("point list: bad number in '" + item + "'");
        }
        start = end + 1;
    }
    return out;
}

inline std::string format_points(const std::vector<Point2>& pts)
{
    std::string s;
    for (std::size_t i = 0; i < pts.size(); ++i)
        s += (i ? ";" : "") + detail::sci17(pts[i].x) + "," + detail::sci17(pts[i].y);
    return s;
}

inline MeshRequest mesh_request(const ExperimentConfig& cfg)
{
    if (cfg.uniform_width)
        return {cfg.domain, std::nullopt, cfg.uniform_width};
    return {cfg.domain, GradingSpec{cfg.gamma, cfg.alpha, cfg.H}, std::nullopt};
}

inline void write_config(std::ostream& os, const ExperimentConfig& cfg)
{
    os << "domain=" << to_string(cfg.domain) << "\n";
    if (cfg.uniform_width)
        os << "uniform_width=" << detail::sci17(*cfg.uniform_width) << "\n";
    else
        os << "alpha=" << detail::sci17(cfg.alpha) << "\nH=" << detail::sci17(cfg.H)
           << "\ngamma=" << format_points(cfg.gamma) << "\n";
    os << "coefficients=" << cfg.coefficients << "\nc_adm=" << detail::sci17(cfg.c_adm) << "\nc_small=" << cfg.c_small
       << "\nr_min=" << cfg.r_min << "\nr_max=" << cfg.r_max << "\nbudget=" << cfg.budget << "\nseed=" << cfg.seed
       << "\n";
}

//
// mesh
//

struct MeshSummary
{
    MeshCheck check;
    CardinalityReport cardinality;
    bool passed() const { return check.ok() && cardinality.passed(); }
};

/// Regularity checks plus the cardinality diagnostic at C = 1 (uniform) or C = alpha (graded).
inline MeshSummary summarize_mesh(const Mesh& mesh, const ExperimentConfig& cfg)
{
    MeshSummary s;
    s.check = check_mesh(mesh);
    s.cardinality = regularity_cardinality_report(mesh, cfg.uniform_width ? 1.0 : cfg.alpha, 200, cfg.seed);
    return s;
}

inline void write_mesh_summary(std::ostream& os, const Mesh& mesh, const MeshSummary& s)
{
    os << "nodes " << mesh.num_nodes() << "\nelements " << mesh.num_elements() << "\ninterior_nodes "
       << make_dofmap(mesh).size() << "\nh_min " << detail::sci17(mesh.h_min()) << "\nh_max "
       << detail::sci17(mesh.h_max()) << "\nshape_constant " << detail::sci17(mesh.shape_constant())
       << "\nneighbor_constant " << detail::sci17(mesh.neighbor_constant()) << "\narea_rel_error "
       << detail::sci17(s.check.area_rel_error) << "\nconforming " << s.check.conforming << "\nincircle_inside "
       << s.check.incircle_inside << "\nneighbor_bounds " << s.check.neighbor_bounds << "\ncardinality_c "
       << detail::sci17(s.cardinality.c_card) << "\ncardinality_width_ratio "
       << detail::sci17(s.cardinality.width_ratio) << "\ncardinality_max_cluster_ratio "
       << detail::sci17(s.cardinality.max_cluster_ratio) << "\ncardinality_violations " << s.cardinality.violations
       << "\nstatus " << (s.passed() ? "PASS" : "FAIL") << "\n";
}

//
// compression sweep
//

struct RunResult
{
    std::size_t n = 0;
    PartitionReport partition;
    std::vector<SweepRow> rows;
    LinearFit bound_fit;             // log10(bound) vs r where bound > bound_floor
    std::size_t bound_fit_points = 0;
    bool bound_monotone = false;
    LinearFit memory_fit;            // bytes vs r over [memory_r_lo, memory_r_hi]
    std::size_t max_block_min_dim = 0;
};

inline constexpr double bound_floor = 1e-13;
inline constexpr std::size_t memory_r_lo = 5, memory_r_hi = 40;

struct Discretized
{
    Mesh mesh;
    AssembledSystem system;
    DualSystem dual;
};

inline Discretized discretize(const ExperimentConfig& cfg)
{
    cfg.validate();
    Mesh mesh = generate_mesh(mesh_request(cfg));
    AssembledSystem sys = assemble_system(mesh, coefficient_preset(cfg.coefficients));
    DualSystem dual = build_dual_system(mesh, sys.dofs);
    return {std::move(mesh), std::move(sys), std::move(dual)};
}

/// Fits and flags computed from finished sweep rows.
inline void summarize_sweep(RunResult& res)
{
    std::vector<double> br, bl, mr, mb;
    res.bound_monotone = true;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const auto& row = res.rows[i];
        if (i > 0 && row.computable_bound > res.rows[i - 1].computable_bound)
            res.bound_monotone = false;
        if (row.computable_bound > bound_floor) {
            br.push_back(double(row.r));
            bl.push_back(std::log10(row.computable_bound));
        }
        if (row.r >= memory_r_lo && row.r <= memory_r_hi) {
            mr.push_back(double(row.r));
            mb.push_back(double(row.memory_bytes));
        }
    }
    res.bound_fit_points = br.size();
    if (br.size() >= 2)
        res.bound_fit = linear_fit(br, bl);
    if (mr.size() >= 2)
        res.memory_fit = linear_fit(mr, mb);
}

inline RunResult run_experiment(const ExperimentConfig& cfg, DenseMatrix* inverse_out = nullptr)
{
    const Discretized d = discretize(cfg);
    RunResult res;
    res.n = d.system.dofs.size();
    DenseMatrix inv = invert_dense(d.system.matrix, cfg.budget);

    const ClusterTree tree = build_cluster_tree(d.mesh, d.dual, cfg.c_small);
    const BlockPartition part = build_block_partition(tree, d.mesh, cfg.c_adm);
    res.partition = partition_report(part, d.mesh, d.dual, 10000, cfg.seed);
    for (const auto& b : part.blocks)
        if (b.admissible)
            res.max_block_min_dim = std::max(res.max_block_min_dim, std::min(part.rows(b).size(), part.cols(b).size()));

    const BlockSvdCache cache = build_svd_cache(inv, part, cfg.r_max);
    for (std::size_t r = cfg.r_min; r <= cfg.r_max; ++r)
        res.rows.push_back(sweep_row(inv, compress(cache, r)));
    summarize_sweep(res);
    if (inverse_out)
        *inverse_out = std::move(inv);
    return res;
}

inline void write_run_summary(std::ostream& os, const RunResult& r)
{
    os << "n " << r.n << "\nblocks " << r.partition.blocks << "\nadmissible_blocks " << r.partition.admissible
       << "\nsmall_blocks " << r.partition.small << "\nforced_small " << r.partition.forced_small
       << "\nblock_tree_depth " << r.partition.block_tree_depth << "\ncluster_tree_depth "
       << r.partition.cluster_tree_depth << "\nc_sparse " << r.partition.sparsity << "\ncover_exact "
       << r.partition.cover_exact << "\nadmissibility_ok " << r.partition.admissibility_ok << "\nsmallness_ok "
       << r.partition.smallness_ok << "\nmax_admissible_min_dim " << r.max_block_min_dim << "\nbound_monotone "
       << r.bound_monotone << "\nbound_fit_points " << r.bound_fit_points << "\nbound_log10_slope "
       << detail::sci17(r.bound_fit.slope) << "\nbound_fit_r2 " << detail::sci17(r.bound_fit.r_squared)
       << "\nmemory_slope_bytes_per_rank " << detail::sci17(r.memory_fit.slope) << "\nmemory_fit_r2 "
       << detail::sci17(r.memory_fit.r_squared) << "\n";
}

//
// verification
//

inline constexpr double duality_limit = 1e-12;
inline constexpr double representation_limit = 1e-10;
inline constexpr std::size_t representation_trials = 20;

/// Duality and representation checks on the configured mesh, followed by the
/// theory grid on uniform unit-square levels.
inline VerificationReport run_verification(const ExperimentConfig& cfg,
                                           VerificationConfig theory = VerificationConfig{})
{
    Discretized d = discretize(cfg);
    if (cfg.perturb_dual != 0.0)
        d.dual.coeffs.front()[0] += cfg.perturb_dual;

    VerificationReport rep;
    const double dual_err = duality_error(d.mesh, d.system.dofs, d.dual);
    rep.rows.push_back({"duality", -1, 0, 0, dual_err, duality_limit, dual_err <= duality_limit});
    const DiscreteSolver solver(d.system.matrix);
    const double rep_err =
        representation_residual(solver, d.mesh, d.system.dofs, d.dual, representation_trials, cfg.seed);
    rep.rows.push_back(
        {"representation", -1, 0, 0, rep_err, representation_limit, rep_err <= representation_limit});

    theory.seed = cfg.seed;
    theory.coefficients = coefficient_preset(cfg.coefficients);
    const VerificationReport t = verify_theory(theory);
    rep.rows.insert(rep.rows.end(), t.rows.begin(), t.rows.end());
    rep.max_growth = t.max_growth;
    return rep;
}

} // namespace hmfem
