#include "kolmo/run.hpp"

#include "kolmo/basis.hpp"
#include "kolmo/error.hpp"
#include "kolmo/io.hpp"
#include "kolmo/measure.hpp"
#include "kolmo/operator.hpp"
#include "kolmo/parallel.hpp"
#include "kolmo/pde.hpp"

#include <Eigen/Core>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace kolmo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 7> kSubcommands = {"forward", "adjoint", "optimize", "simulate",
                                                     "verify",  "certify", "plotdata"};

struct Context {
    RunConfig cfg;
    fs::path out;
    QuadratureGrid grid;
    Basis basis;
    GalerkinSystem system;
    json summary = json::object();
};

void prepare_output(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec && fs::is_directory(dir), "cannot create output directory " + dir.string());
    const fs::path probe = dir / ".kolmo_write_probe";
    {
        std::ofstream f(probe);
        require(static_cast<bool>(f), "output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    require(static_cast<bool>(f), "cannot write " + path.string());
    f << j.dump(2) << '\n';
}

Context setup(RunConfig cfg, const RunOverrides& ov) {
    if (ov.output_dir) cfg.output_dir = *ov.output_dir;
    if (ov.seed) cfg.verify.seed = *ov.seed;
    Context ctx;
    ctx.out = cfg.output_dir;
    prepare_output(ctx.out);
    const auto& d = cfg.discretization;
    const std::vector<int> levels(cfg.problem.dim, d.effective_quad_level());
    ctx.grid = build_grid_cached(cfg.problem.measure, levels);
    ctx.basis = build_basis(cfg.problem.dim, d.max_degree);
    ctx.system = d.assembly == Assembly::dirichlet_form ? assemble_dirichlet_form(cfg.problem, ctx.basis, ctx.grid)
                                                        : assemble_generator(cfg.problem, ctx.basis, ctx.grid);
    ctx.cfg = std::move(cfg);
    return ctx;
}

OptimizeOptions optimize_options(const RunConfig& cfg) {
    OptimizeOptions o;
    o.method = cfg.optimize.method;
    o.tol = cfg.optimize.tol;
    o.max_iter = cfg.optimize.max_iter;
    o.stepping = cfg.discretization.stepping();
    return o;
}

// Best of a run from u = 0 and (multistart - 1) runs from seeded random
// constant controls inside the ball.
OptimizationTrace run_optimizer(const Context& ctx) {
    const auto& p = ctx.cfg.problem;
    const std::size_t P = ctx.grid.size();
    const OptimizeOptions opts = optimize_options(ctx.cfg);
    OptimizationTrace best = optimize(p, ctx.system, ControlField::zero(p.dim, P, p.rho), opts);
    std::mt19937_64 rng(ctx.cfg.verify.seed ^ 0x6d756c7469ULL);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;
    for (std::size_t s = 1; s < ctx.cfg.optimize.multistart; ++s) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(p.dim));
        for (auto& x : v) x = normal(rng);
        const double n = v.norm();
        if (n > 0.0) v *= p.rho * std::pow(uniform(rng), 1.0 / static_cast<double>(p.dim)) / n;
        OptimizationTrace t = optimize(p, ctx.system, ControlField::constant(v, P, p.rho), opts);
        if (t.iterates.back().objective < best.iterates.back().objective) best = std::move(t);
    }
    return best;
}

ControlField resolve_control(Context& ctx, OptimizationTrace* trace_out = nullptr) {
    const auto& p = ctx.cfg.problem;
    const std::size_t P = ctx.grid.size();
    switch (ctx.cfg.control.kind) {
        case ControlChoice::Kind::zero:
            return ControlField::zero(p.dim, P, p.rho);
        case ControlChoice::Kind::constant: {
            const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(
                ctx.cfg.control.value.data(), static_cast<Eigen::Index>(ctx.cfg.control.value.size()));
            ControlField u = ControlField::constant(v, P, p.rho);
            require_admissible(u);
            return u;
        }
        case ControlChoice::Kind::optimized: {
            OptimizationTrace t = run_optimizer(ctx);
            ControlField u = t.final_control;
            if (trace_out) *trace_out = std::move(t);
            return u;
        }
    }
    return ControlField::zero(p.dim, P, p.rho);
}

ControlPolicy make_policy(const Context& ctx, const ControlField& u) {
    return ControlPolicy(ctx.cfg.problem, ctx.grid, u, ctx.cfg.control.interpolation, &ctx.system);
}

std::vector<std::string> coeff_header(std::size_t k) {
    std::vector<std::string> h{"step", "t"};
    for (std::size_t i = 0; i < k; ++i) h.push_back("c" + std::to_string(i));
    return h;
}

void write_coeffs(const fs::path& path, const std::vector<double>& times, const Eigen::MatrixXd& coeffs) {
    CsvWriter w(path, coeff_header(static_cast<std::size_t>(coeffs.cols())));
    for (Eigen::Index s = 0; s < coeffs.rows(); ++s) {
        w.field(static_cast<std::int64_t>(s)).field(times[static_cast<std::size_t>(s)]);
        for (Eigen::Index i = 0; i < coeffs.cols(); ++i) w.field(coeffs(s, i));
        w.end_row();
    }
}

std::vector<std::string> point_header(std::size_t dim, const std::string& prefix) {
    std::vector<std::string> h;
    for (std::size_t k = 0; k < dim; ++k) h.push_back(prefix + std::to_string(k));
    return h;
}

std::vector<std::vector<double>> probes_or_default(const RunConfig& cfg) {
    if (!cfg.verify.probes.empty()) return cfg.verify.probes;
    std::vector<double> x(cfg.problem.dim, 0.0);
    std::vector<std::vector<double>> out{x};
    x[0] = 1.0;
    out.push_back(x);
    return out;
}

void write_probes(const Context& ctx, const fs::path& path, const Eigen::MatrixXd& coeffs,
                  const std::vector<double>& times) {
    auto header = std::vector<std::string>{"probe", "t"};
    for (auto& s : point_header(ctx.cfg.problem.dim, "x")) header.push_back(s);
    header.push_back("value");
    CsvWriter w(path, header);
    const auto probes = probes_or_default(ctx.cfg);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        for (std::size_t s = 0; s < times.size(); ++s) {
            w.field(i).field(times[s]);
            for (double x : probes[i]) w.field(x);
            w.field(evaluate_at(ctx.system, coeffs, times, times[s], probes[i]));
            w.end_row();
        }
    }
}

void write_control(const fs::path& path, const QuadratureGrid& grid, const ControlField& u) {
    auto header = std::vector<std::string>{"node"};
    for (auto& s : point_header(grid.dim(), "x")) header.push_back(s);
    header.push_back("weight");
    for (auto& s : point_header(grid.dim(), "u")) header.push_back(s);
    CsvWriter w(path, header);
    for (std::size_t p = 0; p < grid.size(); ++p) {
        w.field(p);
        for (double x : grid.node(p)) w.field(x);
        w.field(grid.weights(static_cast<Eigen::Index>(p)));
        for (Eigen::Index k = 0; k < u.values.rows(); ++k) w.field(u.values(k, static_cast<Eigen::Index>(p)));
        w.end_row();
    }
}

void write_trace(const fs::path& path, const OptimizationTrace& t) {
    CsvWriter w(path, {"iteration", "objective", "vi_residual", "step", "duality_gap"});
    for (std::size_t i = 0; i < t.iterates.size(); ++i) {
        const auto& r = t.iterates[i];
        w.field(i).field(r.objective).field(r.residual).field(r.step).field(r.duality_gap);
        w.end_row();
    }
}

json trace_summary(const OptimizationTrace& t) {
    return {{"iterations", t.iterates.size()},
            {"objective", t.iterates.back().objective},
            {"vi_residual", t.iterates.back().residual},
            {"duality_gap", t.iterates.back().duality_gap},
            {"converged", t.converged},
            {"message", t.message},
            {"gradient_label", t.gradient_label}};
}

json certification_json(const CertificationReport& r) {
    return {{"assembly", r.assembly == Assembly::direct ? "direct" : "dirichlet_form"},
            {"symmetric", r.symmetric_flag},
            {"invariance_residual", r.invariance_residual},
            {"ibp_residual", r.ibp_residual},
            {"symmetry_residual", r.symmetry_residual},
            {"max_dissipation", r.max_dissipation},
            {"constant_residual", r.constant_residual},
            {"mass_min_eigenvalue", r.mass_min_eigenvalue},
            {"mass_condition", r.mass_condition},
            {"has_coupling", r.has_coupling},
            {"norm_ratio_min", r.norm_ratio_min},
            {"norm_ratio_max", r.norm_ratio_max},
            {"norm_bound", r.norm_bound},
            {"norm_equivalence_ok", r.norm_equivalence_ok},
            {"random_vectors", r.random_vectors}};
}

void cmd_forward(Context& ctx) {
    const ControlField u = resolve_control(ctx);
    const Eigen::MatrixXd c = assemble_coupling(ctx.system, ctx.cfg.problem.control, u);
    const ForwardSolution f = solve_forward(ctx.system, c, ctx.cfg.problem.objective, ctx.cfg.problem.horizon,
                                            ctx.cfg.discretization.stepping());
    write_coeffs(ctx.out / "forward_coeffs.csv", f.times, f.coeffs);
    CsvWriter w(ctx.out / "forward_norms.csv", {"step", "t", "norm"});
    for (std::size_t s = 0; s < f.times.size(); ++s) {
        w.field(s).field(f.times[s]).field(f.norms[s]);
        w.end_row();
    }
    write_probes(ctx, ctx.out / "forward_probes.csv", f.coeffs, f.times);
    ctx.summary["objective"] = objective(f, ctx.system);
    ctx.summary["steps"] = f.steps();
    ctx.summary["energy_integral"] = f.energy_integral;
}

void cmd_adjoint(Context& ctx) {
    const ControlField u = resolve_control(ctx);
    const ControlEvaluation ev = evaluate_control(ctx.cfg.problem, ctx.system, u, ctx.cfg.discretization.stepping());
    write_coeffs(ctx.out / "adjoint_coeffs.csv", ev.adjoint.times, ev.adjoint.coeffs);
    write_probes(ctx, ctx.out / "adjoint_probes.csv", ev.adjoint.coeffs, ev.adjoint.times);
    ctx.summary["objective"] = ev.value;
    ctx.summary["dual_objective"] = ev.dual_value;
    ctx.summary["duality_gap"] = std::abs(ev.value - ev.dual_value);
    ctx.summary["vi_residual"] = ev.residual;
}

void cmd_optimize(Context& ctx) {
    const OptimizationTrace t = run_optimizer(ctx);
    write_trace(ctx.out / "trace.csv", t);
    write_control(ctx.out / "control.csv", ctx.grid, t.final_control);
    ctx.summary = trace_summary(t);
    ctx.summary["method"] = to_string(ctx.cfg.optimize.method);
}

SimulationOptions sim_options(const RunConfig& cfg, SimulationMode mode, std::uint64_t seed) {
    SimulationOptions o;
    o.n_paths = cfg.verify.n_paths;
    o.dt = cfg.verify.dt;
    o.seed = seed;
    o.mode = mode;
    o.x0 = cfg.verify.x0;
    return o;
}

void write_weights(const fs::path& path, const WeightReport& r) {
    CsvWriter w(path, {"mean", "standard_error", "effective_sample_size", "within_three_se"});
    w.field(r.mean).field(r.standard_error).field(r.effective_sample_size).field(r.within_three_se ? 1 : 0);
    w.end_row();
}

void cmd_simulate(Context& ctx) {
    const ControlField u = resolve_control(ctx);
    const ControlPolicy policy = make_policy(ctx, u);
    const auto& cfg = ctx.cfg;
    const PathEnsemble ens = simulate(cfg.problem, policy, ctx.grid, sim_options(cfg, cfg.verify.mode, cfg.verify.seed));

    CsvWriter w(ctx.out / "ensemble_summary.csv", {"time_index", "t", "coordinate", "mean", "standard_error"});
    for (std::size_t r = 0; r < ens.times.size(); ++r) {
        for (std::size_t k = 0; k < ens.dim; ++k) {
            const ScalarField coord{[k](std::span<const double> x) { return x[k]; }, "coordinate"};
            const CostEstimate m = estimate_mean(ens, coord, r);
            w.field(r).field(ens.times[r]).field(k).field(m.estimate).field(m.standard_error);
            w.end_row();
        }
    }
    const CostEstimate cost = estimate_cost(ens, cfg.problem.objective);
    CsvWriter c(ctx.out / "cost.csv", {"mode", "n_paths", "dt", "estimate", "standard_error", "effective_sample_size"});
    c.field(to_string(ens.mode)).field(ens.n_paths).field(ens.dt).field(cost.estimate).field(cost.standard_error)
        .field(cost.effective_sample_size);
    c.end_row();
    const WeightReport wr = weight_report(ens);
    write_weights(ctx.out / "weights.csv", wr);

    if (cfg.verify.dump_paths) {
        // Row p holds path p as [t0 coords, t1 coords, ...].
        const Eigen::Index cols = static_cast<Eigen::Index>(ens.times.size() * ens.dim);
        Eigen::MatrixXd paths(static_cast<Eigen::Index>(ens.n_paths), cols);
        Eigen::MatrixXd pw(static_cast<Eigen::Index>(ens.n_paths), 2);
        for (std::size_t p = 0; p < ens.n_paths; ++p) {
            const auto i = static_cast<Eigen::Index>(p);
            paths.row(i) = Eigen::Map<const Eigen::RowVectorXd>(ens.states.data() + p * cols, cols);
            pw(i, 0) = ens.weights[p];
            pw(i, 1) = ens.log_weights[p];
        }
        write_matrix_binary(ctx.out / "paths.bin", paths);
        write_matrix_binary(ctx.out / "path_weights.bin", pw);
    }
    ctx.summary = {{"mode", to_string(ens.mode)},
                   {"cost", cost.estimate},
                   {"cost_standard_error", cost.standard_error},
                   {"weight_mean", wr.mean},
                   {"weight_within_three_se", wr.within_three_se}};
}

void cmd_verify(Context& ctx) {
    const ControlField u = resolve_control(ctx);
    const ControlPolicy policy = make_policy(ctx, u);
    const auto& cfg = ctx.cfg;
    const Eigen::MatrixXd c = assemble_coupling(ctx.system, cfg.problem.control, u);
    const ForwardSolution f =
        solve_forward(ctx.system, c, cfg.problem.objective, cfg.problem.horizon, cfg.discretization.stepping());
    const auto probes = probes_or_default(cfg);
    const FeynmanKacReport fk =
        feynman_kac_check(cfg.problem, ctx.system, policy, f, probes, cfg.verify.n_paths, cfg.verify.dt, cfg.verify.seed);

    auto header = std::vector<std::string>{"probe"};
    for (auto& s : point_header(cfg.problem.dim, "x")) header.push_back(s);
    for (const char* s : {"t", "monte_carlo", "standard_error", "galerkin", "z"}) header.emplace_back(s);
    CsvWriter w(ctx.out / "fk_report.csv", header);
    for (std::size_t i = 0; i < fk.entries.size(); ++i) {
        const auto& e = fk.entries[i];
        w.field(i / 3);
        for (double x : e.probe) w.field(x);
        w.field(e.time).field(e.monte_carlo).field(e.standard_error).field(e.galerkin).field(e.z);
        w.end_row();
    }

    const PathEnsemble ens =
        simulate(cfg.problem, policy, ctx.grid, sim_options(cfg, SimulationMode::girsanov, cfg.verify.seed + probes.size()));
    const WeightReport wr = weight_report(ens);
    write_weights(ctx.out / "weights.csv", wr);
    ctx.summary = {{"max_abs_z", fk.max_abs_z},
                   {"fk_within_three", fk.max_abs_z <= 3.0},
                   {"weight_mean", wr.mean},
                   {"weight_standard_error", wr.standard_error},
                   {"weight_within_three_se", wr.within_three_se}};
}

void cmd_certify(Context& ctx) {
    const ControlField u = resolve_control(ctx);
    std::optional<Eigen::MatrixXd> coupling;
    if (ctx.cfg.control.kind != ControlChoice::Kind::zero) {
        coupling = assemble_coupling(ctx.system, ctx.cfg.problem.control, u);
    }
    const CertificationReport r = certify_identities(ctx.system, coupling);
    json j = certification_json(r);
    j["problem"] = ctx.cfg.problem.name;
    j["basis_size"] = ctx.system.size();
    j["quadrature_nodes"] = ctx.grid.size();
    write_json(ctx.out / "certify.json", j);
    write_matrix_market(ctx.out / "mass.mtx", ctx.system.mass, "mass matrix");
    write_matrix_market(ctx.out / "stiffness.mtx", ctx.system.stiffness, "stiffness matrix M N");
    write_matrix_binary(ctx.out / "mass.bin", ctx.system.mass);
    write_matrix_binary(ctx.out / "stiffness.bin", ctx.system.stiffness);
    ctx.summary = j;
}

void cmd_plotdata(Context& ctx) {
    OptimizationTrace trace;
    const ControlField u = resolve_control(ctx, &trace);
    const auto& cfg = ctx.cfg;
    const ControlEvaluation ev = evaluate_control(cfg.problem, ctx.system, u, cfg.discretization.stepping());
    const ControlPolicy policy = make_policy(ctx, u);

    CsvWriter w(ctx.out / "plotdata.csv", {"series", "t_or_x", "value"});
    auto row = [&w](const std::string& series, double x, double v) {
        w.field(series).field(x).field(v);
        w.end_row();
    };
    const auto& f = ev.forward;
    for (std::size_t s = 0; s < f.times.size(); ++s) row("forward_norm", f.times[s], f.norms[s]);
    for (std::size_t s = 0; s < f.times.size(); ++s) {
        row("mean_value", f.times[s], f.coeffs.row(static_cast<Eigen::Index>(s)).dot(ctx.system.load));
    }
    const double T = cfg.problem.horizon;
    std::vector<double> x(cfg.problem.dim, 0.0);
    std::vector<double> bu(cfg.problem.dim);
    for (double x1 : ctx.grid.axis_nodes[0]) {
        x[0] = x1;
        row("phi_T_x1", x1, evaluate_at(ctx.system, f.coeffs, f.times, T, x));
        row("adjoint_p0_x1", x1, evaluate_at(ctx.system, ev.adjoint.coeffs, ev.adjoint.times, 0.0, x));
        policy(x, bu);
        row("control_bu1_x1", x1, bu[0]);
    }
    for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
        row("trace_objective", static_cast<double>(i), trace.iterates[i].objective);
        row("trace_vi_residual", static_cast<double>(i), trace.iterates[i].residual);
    }
    ctx.summary = {{"objective", ev.value}, {"vi_residual", ev.residual}};
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_manifest(const Context& ctx, const std::string& subcommand, const CertificationReport& cert) {
    json m;
    m["subcommand"] = subcommand;
    m["config_hash"] = content_hash(ctx.cfg.source.dump());
    m["seed"] = ctx.cfg.verify.seed;
    m["versions"] = {{"kolmo", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"compiler", __VERSION__},
                     {"config_schema", kConfigVersion}};
    m["problem"] = ctx.cfg.problem.name;
    m["basis_size"] = ctx.system.size();
    m["quadrature_nodes"] = ctx.grid.size();
    m["residuals"] = {{"invariance", cert.invariance_residual},
                      {"ibp", cert.ibp_residual},
                      {"symmetry", cert.symmetry_residual},
                      {"mass_condition", cert.mass_condition}};
    m["summary"] = ctx.summary;
    write_json(ctx.out / "manifest.json", m);
}

}  // namespace

bool is_subcommand(const std::string& name) {
    for (const char* s : kSubcommands) {
        if (name == s) return true;
    }
    return false;
}

void run_command(const std::string& subcommand, RunConfig config, const RunOverrides& overrides) {
    require(is_subcommand(subcommand), "unknown subcommand '" + subcommand + "'");
    Context ctx = setup(std::move(config), overrides);
    const auto started = std::chrono::steady_clock::now();
    if (subcommand == "forward") cmd_forward(ctx);
    else if (subcommand == "adjoint") cmd_adjoint(ctx);
    else if (subcommand == "optimize") cmd_optimize(ctx);
    else if (subcommand == "simulate") cmd_simulate(ctx);
    else if (subcommand == "verify") cmd_verify(ctx);
    else if (subcommand == "certify") cmd_certify(ctx);
    else cmd_plotdata(ctx);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    write_manifest(ctx, subcommand, certify_identities(ctx.system));
    write_json(ctx.out / "run_info.json", {{"subcommand", subcommand},
                                           {"started_utc", timestamp()},
                                           {"elapsed_seconds", elapsed},
                                           {"threads", thread_limit()}});
}

int report_failure(const std::exception& e, const std::string& subcommand, const fs::path& output_dir) {
    const auto* err = dynamic_cast<const Error*>(&e);
    const bool numerical = err != nullptr && err->kind() == ErrorKind::numerical;
    if (!numerical) return 2;
    std::error_code ec;
    if (!output_dir.empty()) fs::create_directories(output_dir, ec);
    if (!output_dir.empty() && fs::is_directory(output_dir, ec)) {
        try {
            write_json(output_dir / "diagnostic.json",
                       {{"subcommand", subcommand}, {"kind", "numerical"}, {"message", e.what()}});
        } catch (const std::exception&) {
        }
    }
    return 3;
}

}  // namespace kolmo
