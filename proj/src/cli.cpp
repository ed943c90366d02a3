#include "tridomain/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tridomain/errors.hpp"
#include "tridomain/io.hpp"
#include "tridomain/version.hpp"

namespace tridomain {

namespace fs = std::filesystem;

Problem::Problem(const RunConfig& cfg) : Problem(cfg.cell, cfg.tiling, cfg.conductivity) {}

Problem::Problem(const UnitCellSpec& cell, const TilingSpec& tiling, const ConductivitySpec& cond)
    : mesh(tile(build_unit_cell(cell), tiling)) {
    op = assemble(mesh, cond);
}

namespace {

void setup_logging() {
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("TRIDOMAIN_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

struct Outcome {
    Verdict verdict;
    std::vector<std::string> files;
};

const char* pf(bool ok) { return ok ? "pass" : "fail"; }

ExperimentSpec experiment_spec(const RunConfig& cfg, const Problem& p) {
    ExperimentSpec e;
    e.op = &p.op;
    e.model = cfg.ionic;
    e.gap = cfg.gap;
    e.cfg = cfg.solver;
    e.init = cfg.initial;
    return e;
}

Outcome cmd_run(const RunConfig& cfg, const std::string& dir) {
    Problem p(cfg);
    Stepper st(p.op, cfg.ionic, cfg.gap, cfg.solver);
    const SystemState x0 = initialize(p.op, cfg.solver, cfg.initial);
    const Trajectory traj = st.run(x0, cfg.output.stride);

    Outcome out;
    out.files = emit_outputs(traj, p.op, cfg.ionic, cfg, dir);
    if (cfg.output.matrix_market) {
        write_matrix_market(st.system().A, (fs::path(dir) / "system.mtx").string());
        out.files.push_back("system.mtx");
    }

    bool converged = true, balanced = true;
    double worst_flux = 0.0;
    for (const StepReport& r : traj.reports) {
        converged = converged && r.converged;
        const double bound = 10.0 * cfg.solver.lin_tol * std::max(1.0, r.state_norm);
        for (double f : r.flux) {
            worst_flux = std::max(worst_flux, std::abs(f) / std::max(1.0, r.state_norm));
            balanced = balanced && std::abs(f) <= bound;
        }
    }
    Verdict& v = out.verdict;
    v.experiment = "run";
    v.checks = {{"converged", converged}, {"flux_balance", balanced}};
    v.pass = converged && balanced;
    v.metrics = {{"steps", static_cast<double>(traj.reports.size())},
                 {"dofs", static_cast<double>(p.op.layout.n())},
                 {"worst_relative_flux", worst_flux},
                 {"final_energy", energy(traj.states.back(), p.op, cfg.ionic, cfg.solver).total}};
    std::cout << fmt::format("run: {} steps, {} dofs, final t = {:.6g}\n", traj.reports.size(), p.op.layout.n(),
                             traj.states.back().t);
    std::cout << fmt::format("flux balance: {} (worst relative {:.3e})\n", pf(balanced), worst_flux);
    return out;
}

Outcome cmd_certify(const RunConfig& cfg, const std::string& dir) {
    const ExperimentParams& e = cfg.experiment;
    const AssumptionReport rep = certify_assumptions(cfg.ionic, e.v_range, e.w_range, e.samples);
    std::cout << rep.table();
    std::cout << fmt::format("E coefficient: {:.6g}\n", rep.e_coefficient);
    Outcome out;
    write_text((fs::path(dir) / "assumptions.csv").string(), rep.csv());
    out.files.push_back("assumptions.csv");
    Verdict& v = out.verdict;
    v.experiment = "certify";
    for (char c : {'1', '2', '3', '4'}) v.checks.push_back({fmt::format("check_{}", c), rep.check_pass(c)});
    v.pass = rep.all_pass();
    v.metrics = {{"e_coefficient", rep.e_coefficient}, {"fitted_inv_C", rep.fitted_inv_C}};
    return out;
}

Outcome cmd_spd(const RunConfig& cfg, const std::string& dir, double delta) {
    Problem p(cfg);
    const SolverConfig& s = cfg.solver;
    SpMat A;
    if (delta > 0.0) {
        A = build_system_matrix(p.op, s.eps, delta, s.dt, cfg.ionic.beta1, cfg.gap.G_gap, s.C_ratio).A;
    } else {
        // without the delta regularisation only the interface part is tested
        A = interface_operator(p.op, s.eps, s.eps * s.C_ratio);
    }
    const SpdReport strict = check_spd(A, SpdMode::Strict);
    const SpdReport semi = check_spd(A, SpdMode::Semidefinite);
    std::cout << fmt::format("strict PD: {} (min pivot {:.3e}, threshold {:.3e})\n", pf(strict.pass),
                             strict.min_pivot, strict.threshold);
    std::cout << fmt::format("semidefinite: {} (min Ritz {:.3e}, threshold {:.3e})\n", pf(semi.pass), semi.min_ritz,
                             -std::abs(semi.threshold));
    Outcome out;
    if (cfg.output.matrix_market) {
        write_matrix_market(A, (fs::path(dir) / "spd_matrix.mtx").string());
        out.files.push_back("spd_matrix.mtx");
    }
    Verdict& v = out.verdict;
    v.experiment = "spd";
    v.checks = {{"strict_pd", strict.pass}, {"semidefinite", semi.pass}};
    v.pass = delta > 0.0 ? strict.pass : semi.pass;
    v.metrics = {{"delta", delta},
                 {"min_pivot", strict.min_pivot},
                 {"min_ritz", semi.min_ritz},
                 {"norm_inf", strict.norm},
                 {"dofs", static_cast<double>(A.rows())}};
    return out;
}

Outcome cmd_stability(const RunConfig& cfg, const std::string& dir, int jobs) {
    Problem p(cfg);
    const StabilityReport rep =
        stability_experiment(experiment_spec(cfg, p), cfg.experiment.etas, jobs, cfg.experiment.stability_tolerance);
    std::cout << rep.text();
    Outcome out;
    std::ostringstream csv;
    csv << "eta,dv,dw,ds,amplification,dv_over_eta\n";
    for (const auto& r : rep.rows)
        csv << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.eta, r.dv, r.dw, r.ds,
                           r.amplification, r.dv_over_eta);
    write_text((fs::path(dir) / "stability.csv").string(), csv.str());
    out.files.push_back("stability.csv");
    Verdict& v = out.verdict;
    v.experiment = "stability";
    v.checks = {{"ratios_agree", rep.ratios_agree}, {"zero_bitwise", rep.zero_bitwise}, {"gronwall", rep.gronwall_ok}};
    v.pass = rep.ratios_agree && rep.zero_bitwise;
    v.metrics = {{"ratio_spread", rep.ratio_spread},
                 {"gronwall_C", rep.gronwall_C},
                 {"validation_worst", rep.validation_worst}};
    return out;
}

Outcome cmd_delta(const RunConfig& cfg, const std::string& dir, int jobs) {
    Problem p(cfg);
    const DeltaLimitReport rep = delta_limit(experiment_spec(cfg, p), cfg.experiment.deltas, jobs);
    std::cout << rep.text();
    Outcome out;
    std::ostringstream csv;
    csv << "delta,distance\n";
    for (const auto& r : rep.rows) csv << fmt::format("{:.17g},{:.17g}\n", r.delta, r.distance);
    write_text((fs::path(dir) / "delta_limit.csv").string(), csv.str());
    out.files.push_back("delta_limit.csv");
    out.verdict.experiment = "delta-limit";
    out.verdict.checks = {{"strictly_decreasing", rep.strictly_decreasing}};
    out.verdict.pass = rep.strictly_decreasing;
    for (const auto& r : rep.rows) out.verdict.metrics.push_back({fmt::format("d({:g})", r.delta), r.distance});
    return out;
}

Outcome cmd_mms(const RunConfig& cfg, const std::string& dir, int jobs) {
    const std::vector<int>& dens = cfg.experiment.densities;
    Outcome out;
    Verdict& v = out.verdict;
    v.experiment = "mms";
    std::ostringstream csv;
    csv << "kind,density,h,dofs,err_u,err_v\n";
    bool all = true;
    for (MmsKind k : {MmsKind::Constant, MmsKind::PiecewiseLinear, MmsKind::Trig}) {
        const MmsReport rep = mms_convergence(k, dens, jobs);
        std::cout << rep.text();
        const char* name = k == MmsKind::Constant ? "constant" : k == MmsKind::PiecewiseLinear ? "linear" : "trig";
        double worst = 0.0;
        for (const auto& r : rep.rows) {
            worst = std::max({worst, r.err_u, r.err_v});
            csv << fmt::format("{},{},{:.17g},{},{:.17g},{:.17g}\n", name, r.density, r.h, r.dofs, r.err_u, r.err_v);
        }
        bool ok;
        if (k == MmsKind::Trig) {
            ok = rep.slope_u >= 1.7 && rep.slope_u <= 2.3;
            v.metrics.push_back({"slope_u", rep.slope_u});
            v.metrics.push_back({"slope_v", rep.slope_v});
        } else {
            ok = worst <= 1e-9;
            v.metrics.push_back({fmt::format("{}_max_error", name), worst});
        }
        v.checks.push_back({name, ok});
        all = all && ok;
    }
    write_text((fs::path(dir) / "mms.csv").string(), csv.str());
    out.files.push_back("mms.csv");
    v.pass = all;
    return out;
}

Outcome cmd_apriori(const RunConfig& cfg, const std::string& dir) {
    std::array<AprioriReport, 2> reps;
    for (int level = 0; level < 2; ++level) {
        UnitCellSpec cell = cfg.cell;
        cell.mesh_density = cfg.cell.mesh_density * (level + 1);
        Problem p(cell, cfg.tiling, cfg.conductivity);
        Stepper st(p.op, cfg.ionic, cfg.gap, cfg.solver);
        const Trajectory traj = st.run(initialize(p.op, cfg.solver, cfg.initial));
        reps[level] = apriori_monitor(traj, p.op, cfg.ionic, cfg.solver);
    }
    const auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
    const double d_vw = rel(reps[0].vw_sup, reps[1].vw_sup);
    const double d_u = rel(reps[0].u_l2h1, reps[1].u_l2h1);
    const double d_vr = rel(reps[0].vr_norm, reps[1].vr_norm);
    std::cout << fmt::format("{:<10} {:>14} {:>14} {:>10}\n", "monitor", "h", "h/2", "rel diff");
    std::cout << fmt::format("{:<10} {:>14.6e} {:>14.6e} {:>10.3e}\n", "E_vw", reps[0].vw_sup, reps[1].vw_sup, d_vw);
    std::cout << fmt::format("{:<10} {:>14.6e} {:>14.6e} {:>10.3e}\n", "E_u", reps[0].u_l2h1, reps[1].u_l2h1, d_u);
    std::cout << fmt::format("{:<10} {:>14.6e} {:>14.6e} {:>10.3e}\n", "E_vr", reps[0].vr_norm, reps[1].vr_norm, d_vr);
    std::cout << fmt::format("{:<10} {:>14.6e} {:>14.6e}\n", "Ia_dual", reps[0].ia_dual, reps[1].ia_dual);
    std::cout << fmt::format("{:<10} {:>14.6e} {:>14.6e}\n", "dt_norms", reps[0].dt_norms, reps[1].dt_norms);

    Outcome out;
    std::ostringstream csv;
    csv << "level,vw_sup,u_l2h1,vr_norm,ia_dual,dt_norms,duality_margin\n";
    for (int l = 0; l < 2; ++l)
        csv << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", l, reps[l].vw_sup, reps[l].u_l2h1,
                           reps[l].vr_norm, reps[l].ia_dual, reps[l].dt_norms, reps[l].duality_margin);
    write_text((fs::path(dir) / "apriori.csv").string(), csv.str());
    out.files.push_back("apriori.csv");
    const bool agree = d_vw <= 0.1 && d_u <= 0.1 && d_vr <= 0.1;
    const bool dual = reps[0].duality_ok && reps[1].duality_ok;
    out.verdict.experiment = "apriori";
    out.verdict.checks = {{"mesh_agreement", agree}, {"duality", dual}};
    out.verdict.pass = agree && dual;
    out.verdict.metrics = {{"rel_vw", d_vw}, {"rel_u", d_u}, {"rel_vr", d_vr}};
    return out;
}

Outcome cmd_nondim(const RunConfig& cfg) {
    const NondimReport rep = nondimensionalize(cfg.units);
    std::cout << rep.text();
    Outcome out;
    out.verdict.experiment = "nondim";
    const bool identity = rep.identity_rel_err <= 1e-12;
    out.verdict.checks = {{"identity", identity}, {"discrepancy_flagged", rep.discrepancy_flagged}};
    out.verdict.pass = identity;
    out.verdict.metrics = {{"epsilon", rep.epsilon},
                           {"L_cm", rep.L_cm},
                           {"tau_m_ms", rep.tau_m_ms},
                           {"identity_rel_err", rep.identity_rel_err},
                           {"discrepancy_factor", rep.discrepancy_factor}};
    return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Microscopic tridomain cardiac simulator"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path, output_dir;
    int jobs = 1;
    app.add_option("-c,--config", config_path, "TOML configuration file");
    app.add_option("-o,--output", output_dir, "output directory (overrides output.directory)");
    app.add_option("-j,--jobs", jobs, "worker threads for parameter sweeps")->check(CLI::PositiveNumber);

    double spd_delta = -1.0;
    app.add_subcommand("run", "time integration with diagnostics");
    app.add_subcommand("certify", "check the ionic model assumptions");
    app.add_subcommand("spd", "definiteness of the assembled operators")
        ->add_option("--delta", spd_delta, "regularisation (default solver.delta)");
    app.add_subcommand("stability", "perturbation growth against the Gronwall bound");
    app.add_subcommand("mms", "manufactured solution convergence");
    app.add_subcommand("delta-limit", "vanishing regularisation sweep");
    app.add_subcommand("apriori", "a priori monitors on two meshes");
    app.add_subcommand("nondim", "nondimensional groups from physical units");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    std::string raw;
    try {
        if (!config_path.empty()) cfg = load_config(config_path, &raw);
        cfg.validate();
        if (!cfg.experiment.kind.empty() && cfg.experiment.kind != cmd)
            throw ConfigError("config experiment.kind '" + cfg.experiment.kind + "' does not match subcommand '" +
                              cmd + "'");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    const std::string dir = output_dir.empty() ? cfg.output.directory : output_dir;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        fs::create_directories(dir);
        if (cmd == "run") out = cmd_run(cfg, dir);
        else if (cmd == "certify") out = cmd_certify(cfg, dir);
        else if (cmd == "spd") out = cmd_spd(cfg, dir, spd_delta >= 0.0 ? spd_delta : cfg.solver.delta);
        else if (cmd == "stability") out = cmd_stability(cfg, dir, jobs);
        else if (cmd == "mms") out = cmd_mms(cfg, dir, jobs);
        else if (cmd == "delta-limit") out = cmd_delta(cfg, dir, jobs);
        else if (cmd == "apriori") out = cmd_apriori(cfg, dir);
        else out = cmd_nondim(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidSpec& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (const auto* sf = dynamic_cast<const SolverFailure*>(&e))
            spdlog::error("solver failure: residual {:.3e}", sf->residual);
        if (const auto* dv = dynamic_cast<const Divergence*>(&e)) spdlog::error("diverged at t = {:.6g}", dv->t);
        out.verdict.experiment = cmd;
        out.verdict.pass = false;
        out.verdict.checks.push_back({"completed", false});
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    try {
        write_verdict(out.verdict, (fs::path(dir) / "verdict.json").string());
        out.files.push_back("verdict.json");
        std::ostringstream command;
        for (int i = 0; i < argc; ++i) command << (i ? " " : "") << argv[i];
        write_manifest((fs::path(dir) / "manifest.json").string(), raw, command.str(), wall, out.files);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << fmt::format("{}: {}\n", cmd, pf(out.verdict.pass));
    return out.verdict.pass ? 0 : 1;
}

}  // namespace tridomain
