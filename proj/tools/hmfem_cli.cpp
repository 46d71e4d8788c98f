// Command-line driver: `mesh`, `run` and `verify`.

#include <hmfem/experiment.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace hmfem;

namespace {

void write_file(const fs::path& path, const auto& writer)
{
    std::ofstream os(path);
    if (!os)
        throw InvalidInput("cannot open " + path.string() + " for writing");
    writer(os);
    if (!os)
        throw NumericalError("write to " + path.string() + " failed");
}

int cmd_mesh(const ExperimentConfig& cfg, const fs::path& out)
{
    cfg.validate();
    const Mesh mesh = generate_mesh(mesh_request(cfg));
    const MeshSummary s = summarize_mesh(mesh, cfg);
    write_file(out / "mesh.txt", [&](std::ostream& os) { write_mesh(os, mesh); });
    write_file(out / "mesh_report.txt", [&](std::ostream& os) {
        write_config(os, cfg);
        write_mesh_summary(os, mesh, s);
    });
    std::cout << "nodes " << mesh.num_nodes() << " elements " << mesh.num_elements() << " status "
              << (s.passed() ? "PASS" : "FAIL") << "\n";
    return s.passed() ? 0 : 1;
}

int cmd_run(const ExperimentConfig& cfg, const fs::path& out)
{
    const RunResult r = run_experiment(cfg);
    write_file(out / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, r.rows); });
    write_file(out / "summary.txt", [&](std::ostream& os) {
        write_config(os, cfg);
        write_run_summary(os, r);
    });
    write_run_summary(std::cout, r);
    return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const fs::path& out)
{
    const VerificationReport rep = run_verification(cfg);
    write_file(out / "verify_report.txt", [&](std::ostream& os) { write_verification_report(os, rep); });
    std::size_t failed = 0;
    for (const auto& row : rep.rows)
        if (!row.pass) {
            if (failed++ == 0)
                std::cerr << "failing rows:\n";
            std::cerr << "  " << row.property << " cluster " << row.cluster << " level " << row.level
                      << " measured " << detail::sci17(row.measured) << " limit " << detail::sci17(row.limit)
                      << "\n";
        }
    std::cout << rep.rows.size() << " rows, " << failed << " failed\n";
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"H-matrix compression of FEM inverses"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_config("--config", "", "flat key=value file; command-line flags take precedence");

    ExperimentConfig cfg;
    std::string out = ".", domain = "lshape", gamma;
    double uniform_width = 0;

    app.add_option("--out", out, "output directory (created if missing)");
    app.add_option("--seed", cfg.seed, "random seed for sampling and trial vectors");
    app.add_option("--domain", domain, "lshape or unit_square");
    app.add_option("--alpha", cfg.alpha, "grading exponent");
    app.add_option("--H", cfg.H, "coarse mesh width");
    app.add_option("--gamma", gamma, "grading points as x,y;x,y");
    app.add_option("--uniform_width,--uniform-width", uniform_width, "uniform mesh width (disables grading)");
    app.add_option("--coefficients", cfg.coefficients, "convection (alias paper_s4) or laplace");
    app.add_option("--c_adm,--c-adm", cfg.c_adm, "admissibility constant");
    app.add_option("--c_small,--c-small", cfg.c_small, "small-block cardinality");
    app.add_option("--r_min,--r-min", cfg.r_min, "first rank of the sweep");
    app.add_option("--r_max,--r-max", cfg.r_max, "last rank of the sweep");
    app.add_option("--budget", cfg.budget, "largest N for the dense inverse");
    app.add_option("--perturb_dual,--perturb-dual", cfg.perturb_dual)->group("");

    auto* mesh = app.add_subcommand("mesh", "generate a mesh and its regularity report");
    auto* run = app.add_subcommand("run", "compression sweep over the rank range");
    auto* verify = app.add_subcommand("verify", "duality, representation and local-estimate suites");

    CLI11_PARSE(app, argc, argv);

    try {
        cfg.domain = parse_domain(domain);
        if (uniform_width > 0)
            cfg.uniform_width = uniform_width;
        if (!gamma.empty())
            cfg.gamma = parse_points(gamma);
        fs::create_directories(out);
        if (*mesh)
            return cmd_mesh(cfg, out);
        if (*run)
            return cmd_run(cfg, out);
        if (*verify)
            return cmd_verify(cfg, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
