#include "kolmo/control.hpp"

#include "kolmo/error.hpp"

#include <algorithm>
#include <cmath>

namespace kolmo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double objective(const ForwardSolution& forward, const GalerkinSystem& system) {
    const std::size_t S = forward.steps();
    require(S >= 1, "forward solution has no time steps");
    const double h = forward.times[1] - forward.times[0];
    const VectorXd means = forward.coeffs * system.load;  // <phi(t_s), 1>_nu
    double sum = 0.5 * (means[0] + means[static_cast<Index>(S)]);
    for (std::size_t s = 1; s < S; ++s) sum += means[static_cast<Index>(s)];
    return h * sum;
}

double dual_objective(const AdjointSolution& adjoint, const VectorXd& g_nodal,
                      const GalerkinSystem& system) {
    const VectorXd p0 = adjoint.coeffs.row(0).transpose();
    return inner_product({g_nodal.data(), static_cast<std::size_t>(g_nodal.size())},
                         {system.nodal(p0).data(), system.grid.size()}, system.grid);
}

MatrixXd gradient_field(const ForwardSolution& forward, const AdjointSolution& adjoint,
                        const GalerkinSystem& system, const BOperator& b) {
    const std::size_t S = forward.steps();
    require(adjoint.steps() == S && adjoint.multipliers.rows() == static_cast<Index>(S),
            "forward and adjoint solutions use different time grids");
    for (std::size_t s = 0; s <= S; ++s) {
        require(std::abs(forward.times[s] - adjoint.times[s]) <= 1e-12 * (1.0 + forward.times[s]),
                "forward and adjoint solutions use different time grids");
    }
    require(std::abs(forward.theta - adjoint.theta) < 1e-15, "forward and adjoint theta differ");

    const double h = forward.times[1] - forward.times[0];
    const double theta = forward.theta;
    const Index P = static_cast<Index>(system.grid.size());
    const Index n = static_cast<Index>(system.grid.dim());

    const MatrixXd lam = adjoint.multipliers * system.eval.values;  // S x P
    MatrixXd w(n, P);
    for (Index k = 0; k < n; ++k) {
        const MatrixXd dphi = forward.coeffs * system.grad_ops[static_cast<std::size_t>(k)];  // (S+1) x P
        const MatrixXd mixed = theta * h * dphi.bottomRows(static_cast<Index>(S)) +
                               (1.0 - theta) * h * dphi.topRows(static_cast<Index>(S));
        w.row(k) = lam.cwiseProduct(mixed).colwise().sum();
    }
    return apply_B_adjoint(b, w, system.grid);
}

ControlField project(const MatrixXd& v, double rho) {
    require(rho > 0.0, "rho must be positive");
    ControlField u{v, rho};
    for (Index p = 0; p < v.cols(); ++p) {
        const double norm = v.col(p).norm();
        if (norm > rho) u.values.col(p) *= rho / norm;
    }
    return u;
}

double vi_residual(const ControlField& u, const MatrixXd& d, const QuadratureGrid& grid) {
    require_admissible(u);
    require(d.rows() == u.values.rows() && d.cols() == u.values.cols(), "gradient field shape mismatch");
    const VectorXd pointwise = u.values.cwiseProduct(d).colwise().sum().transpose() +
                               u.rho * d.colwise().norm().transpose();
    return pointwise.dot(grid.weights);
}

ControlField linear_minimizer(const MatrixXd& d, double rho) {
    ControlField v{MatrixXd::Zero(d.rows(), d.cols()), rho};
    for (Index p = 0; p < d.cols(); ++p) {
        const double norm = d.col(p).norm();
        if (norm > 0.0) v.values.col(p) = -rho * d.col(p) / norm;
    }
    return v;
}

Method parse_method(const std::string& name) {
    if (name == "projected_gradient") return Method::projected_gradient;
    if (name == "conditional_gradient") return Method::conditional_gradient;
    throw Error(ErrorKind::validation, "unknown optimization method '" + name + "'");
}

std::string to_string(Method m) {
    return m == Method::projected_gradient ? "projected_gradient" : "conditional_gradient";
}

double evaluate_objective(const ProblemSpec& problem, const GalerkinSystem& system,
                          const ControlField& u, const TimeStepping& stepping) {
    const MatrixXd c = assemble_coupling(system, problem.control, u);
    return objective(solve_forward(system, c, problem.objective, problem.horizon, stepping), system);
}

ControlEvaluation evaluate_control(const ProblemSpec& problem, const GalerkinSystem& system,
                                   const ControlField& u, const TimeStepping& stepping) {
    ControlEvaluation ev;
    ev.control = u;
    ev.coupling = assemble_coupling(system, problem.control, u);
    TimeStepping fixed = stepping;
    if (fixed.steps == 0) fixed.steps = default_steps(system, ev.coupling, problem.horizon);
    const VectorXd g = sample(problem.objective, system.grid);
    ev.forward = solve_forward(system, ev.coupling, g, problem.horizon, fixed);
    ev.adjoint = solve_adjoint(system, ev.coupling, problem.horizon, fixed);
    ev.gradient = gradient_field(ev.forward, ev.adjoint, system, problem.control);
    ev.value = objective(ev.forward, system);
    ev.dual_value = dual_objective(ev.adjoint, g, system);
    ev.residual = vi_residual(u, ev.gradient, system.grid);
    return ev;
}

namespace {

double weighted_dot(const MatrixXd& a, const MatrixXd& b, const QuadratureGrid& grid) {
    return a.cwiseProduct(b).colwise().sum().dot(grid.weights.transpose());
}

struct StepResult {
    bool ok = false;
    ControlField control;
    double value = 0.0;
    double step = 0.0;
};

StepResult projected_gradient_step(const ProblemSpec& problem, const GalerkinSystem& system,
                                   const ControlEvaluation& cur, const OptimizeOptions& opt,
                                   const TimeStepping& stepping) {
    for (double alpha = 1.0; alpha >= opt.min_step; alpha *= 0.5) {
        ControlField cand = project(cur.control.values - alpha * cur.gradient, problem.rho);
        const double slope = weighted_dot(cur.gradient, cand.values - cur.control.values, system.grid);
        const double value = evaluate_objective(problem, system, cand, stepping);
        if (value < cur.value && value <= cur.value + opt.armijo * slope) {
            return {true, std::move(cand), value, alpha};
        }
    }
    return {};
}

StepResult conditional_gradient_step(const ProblemSpec& problem, const GalerkinSystem& system,
                                     const ControlEvaluation& cur, const OptimizeOptions& opt,
                                     const TimeStepping& stepping) {
    const ControlField vertex = linear_minimizer(cur.gradient, problem.rho);
    const MatrixXd direction = vertex.values - cur.control.values;
    auto at = [&](double s) { return project(cur.control.values + s * direction, problem.rho); };
    auto value_at = [&](double s) { return evaluate_objective(problem, system, at(s), stepping); };

    // Golden-section search on [0, 1].
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, b = 1.0;
    double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
    double f1 = value_at(x1), f2 = value_at(x2);
    for (int it = 0; it < opt.golden_iterations; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = value_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = value_at(x2);
        }
    }
    double best_s = f1 <= f2 ? x1 : x2;
    double best = std::min(f1, f2);
    const double f_end = value_at(1.0);
    if (f_end <= best) {
        best = f_end;
        best_s = 1.0;
    }
    if (!(best < cur.value)) return {};
    return {true, at(best_s), best, best_s};
}

}  // namespace

OptimizationTrace optimize(const ProblemSpec& problem, const GalerkinSystem& system,
                           const ControlField& u0, const OptimizeOptions& options) {
    require(options.tol > 0.0, "tolerance must be positive");
    require_admissible(u0);
    require(std::abs(u0.rho - problem.rho) <= 1e-15 * problem.rho, "initial control uses a different rho");

    TimeStepping stepping = options.stepping;
    if (stepping.steps == 0) {
        // Fix the grid once so every iterate is measured with the same scheme.
        const MatrixXd c = assemble_coupling(system, problem.control, u0);
        stepping.steps = default_steps(system, c, problem.horizon);
        const ControlField extreme = linear_minimizer(MatrixXd::Ones(u0.values.rows(), u0.values.cols()),
                                                      problem.rho);
        const MatrixXd ce = assemble_coupling(system, problem.control, extreme);
        stepping.steps = std::max(stepping.steps, default_steps(system, ce, problem.horizon));
    }

    OptimizationTrace trace;
    trace.gradient_label = problem.symmetric ? "gradient" : "formal gradient";
    ControlEvaluation cur = evaluate_control(problem, system, u0, stepping);
    trace.iterates.push_back({cur.value, cur.residual, 0.0, std::abs(cur.value - cur.dual_value)});

    std::size_t iter = 0;
    for (;; ++iter) {
        if (cur.residual <= options.tol) {
            trace.converged = true;
            trace.message = "variational-inequality residual below tolerance";
            break;
        }
        if (iter >= options.max_iter) {
            trace.message = "iteration limit reached";
            break;
        }
        const StepResult step = options.method == Method::projected_gradient
                                    ? projected_gradient_step(problem, system, cur, options, stepping)
                                    : conditional_gradient_step(problem, system, cur, options, stepping);
        if (!step.ok) {
            trace.message = "no decreasing step found (residual " + std::to_string(cur.residual) + ")";
            break;
        }
        cur = evaluate_control(problem, system, step.control, stepping);
        trace.iterates.push_back({cur.value, cur.residual, step.step, std::abs(cur.value - cur.dual_value)});
    }

    trace.final_control = cur.control;
    trace.final_forward = std::move(cur.forward);
    trace.final_adjoint = std::move(cur.adjoint);
    trace.final_gradient = std::move(cur.gradient);
    return trace;
}

}  // namespace kolmo
