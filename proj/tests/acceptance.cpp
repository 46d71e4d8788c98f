// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <hmfem/experiment.hpp>

#include <chrono>
#include <cstdio>
#include <random>
#include <string>

using namespace hmfem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail)
{
    std::printf("criterion %2d %-28s %s  %s\n", id, name, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ExperimentConfig desk_config()
{
    ExperimentConfig cfg;  // L-shape, alpha 5, H 0.06, convection, C_adm 2, C_small 25, r 1..40
    return cfg;
}

} // namespace

int main()
{
    // 1. duality on the desk mesh
    {
        const auto t0 = Clock::now();
        const Discretized d = discretize(desk_config());
        const double err = duality_error(d.mesh, d.system.dofs, d.dual);
        const double t = seconds_since(t0);
        report(1, "duality", err <= 1e-12 && t < 10,
               fmt("max|<phi_n,lambda_m> - delta_nm| = %.3e (<= 1e-12), N = %zu, %.1f s (< 10)", err,
                   d.system.dofs.size(), t));
    }

    // 2. representation formula, 20 random right-hand sides
    {
        const auto t0 = Clock::now();
        ExperimentConfig cfg = desk_config();
        cfg.H = 0.12;
        const Discretized d = discretize(cfg);
        const DiscreteSolver solver(d.system.matrix);
        const double res = representation_residual(solver, d.mesh, d.system.dofs, d.dual, 20, 1);
        const double t = seconds_since(t0);
        report(2, "representation formula", res <= 1e-10 && t < 30,
               fmt("max relative residual = %.3e (<= 1e-10), N = %zu, %.1f s (< 30)", res, d.system.dofs.size(), t));
    }

    // 3-7 share the desk compression run
    {
        const ExperimentConfig cfg = desk_config();
        const auto t0 = Clock::now();
        DenseMatrix inv;
        const RunResult run = run_experiment(cfg, &inv);
        const double t = seconds_since(t0);

        const bool in_band = run.n >= 1500 && run.n <= 4000;
        report(3, "exponential rank decay",
               in_band && run.bound_monotone && run.bound_fit_points >= 2 && run.bound_fit.slope <= -0.15 && t < 600,
               fmt("slope log10(bound) = %.4f per rank (<= -0.15) over %zu ranks, monotone %s, N = %zu, %.1f s",
                   run.bound_fit.slope, run.bound_fit_points, run.bound_monotone ? "yes" : "no", run.n, t));

        double worst = 0;
        std::size_t violations = 0;
        for (const auto& row : run.rows) {
            if (row.spectral_error > row.computable_bound * (1 + 1e-6))
                ++violations;
            if (row.computable_bound > 0)
                worst = std::max(worst, row.spectral_error / row.computable_bound);
        }
        report(4, "bound validity", violations == 0,
               fmt("%zu of %zu ranks violate error <= bound*(1+1e-6); max error/bound = %.4f", violations,
                   run.rows.size(), worst));

        {
            const Discretized d = discretize(cfg);
            const ClusterTree tree = build_cluster_tree(d.mesh, d.dual, cfg.c_small);
            const BlockPartition part = build_block_partition(tree, d.mesh, cfg.c_adm);
            const std::size_t kmax = std::max<std::size_t>(run.max_block_min_dim, 1);
            const HMatrix h = compress(build_svd_cache(inv, part), kmax);
            const double entry = (to_dense(h) - inv).cwiseAbs().maxCoeff();
            std::mt19937_64 rng(5);
            std::normal_distribution<double> g;
            double mv = 0;
            for (int k = 0; k < 10; ++k) {
                Vector x(inv.cols());
                for (auto& v : x)
                    v = g(rng);
                const Vector ref = inv * x;
                mv = std::max(mv, (hmatvec(h, x) - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff());
            }
            report(5, "exactness at full rank", entry <= 1e-12 && mv <= 1e-12,
                   fmt("r = %zu: max entry error = %.3e (<= 1e-12), relative matvec error = %.3e (<= 1e-12)", kmax,
                       entry, mv));
        }

        report(6, "memory linearity", run.memory_fit.r_squared >= 0.99,
               fmt("R^2 of memory_bytes vs r on [5,40] = %.4f (>= 0.99), slope %.1f bytes/rank, N = %zu",
                   run.memory_fit.r_squared, run.memory_fit.slope, run.n));

        const auto& p = run.partition;
        report(7, "partition correctness",
               p.cover_exact && p.admissibility_ok && p.smallness_ok && p.forced_small == 0,
               fmt("tiling %s, admissibility %s, smallness %s, forced_small = %zu, blocks = %zu",
                   p.cover_exact ? "exact" : "broken", p.admissibility_ok ? "ok" : "violated",
                   p.smallness_ok ? "ok" : "violated", p.forced_small, p.blocks));
    }

    // 8-9 theory grid on two uniform levels
    {
        const auto t0 = Clock::now();
        const VerificationReport rep = verify_theory(VerificationConfig{});
        const double t = seconds_since(t0);
        report(8, "discrete Caccioppoli", rep.passed("caccioppoli_growth") && rep.passed("caccioppoli_max_ratio") && t < 300,
               fmt("max growth of max ratio between levels = %.4f (<= 1.5), %.1f s (< 300)", rep.max_growth, t));

        const bool grid_ok = rep.passed("cutoff_support") && rep.passed("cutoff_one_on_b") && rep.passed("cutoff_range");
        const Mesh m = generate_mesh({Domain::unit_square, std::nullopt, 0.025});
        std::size_t centre = 0;
        for (std::size_t e = 0; e < m.num_elements(); ++e)
            if (distance(m.element(e).incenter, {0.5, 0.5}) < distance(m.element(centre).incenter, {0.5, 0.5}))
                centre = e;
        const Cluster b(std::vector<std::size_t>{centre});
        double worst = 0, prev = 0;
        for (double k : {8.0, 16.0, 32.0}) {
            const double gnorm = sup_gradient(m, cutoff_function(m, b, k * m.h_max()).values);
            if (prev > 0)
                worst = std::max(worst, gnorm / prev);
            prev = gnorm;
        }
        report(9, "cut-off properties", grid_ok && worst <= 0.75,
               fmt("support/one/range exact on all grid cells: %s; sup|grad| ratio under delta doubling = %.4f (<= 0.75)",
                   grid_ok ? "yes" : "no", worst));
    }

    // 10. cardinality diagnostics
    {
        const Mesh uni = generate_mesh({Domain::unit_square, std::nullopt, 0.05});
        const Mesh g0 = generate_mesh({Domain::lshape, GradingSpec{{{0.5, 0.5}}, 5.0, 0.12}, std::nullopt});
        const Mesh g1 = generate_mesh({Domain::lshape, GradingSpec{{{0.5, 0.5}}, 5.0, 0.06}, std::nullopt});
        const auto ru = regularity_cardinality_report(uni, 1.0, 200);
        const auto rg = regularity_cardinality_report(g1, 5.0, 200);
        const auto n0 = regularity_cardinality_report(g0, 1.0, 200);
        const auto n1 = regularity_cardinality_report(g1, 1.0, 200);
        const double growth = n1.width_ratio / n0.width_ratio;
        report(10, "cardinality diagnostics", ru.passed() && rg.passed() && growth > 2.0,
               fmt("uniform C=1 %s, graded C=5 %s, graded C=1 width ratio grows x%.2f under refinement",
                   ru.passed() ? "pass" : "fail", rg.passed() ? "pass" : "fail", growth));
    }

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
