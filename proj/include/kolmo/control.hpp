#pragma once

#include "kolmo/operator.hpp"
#include "kolmo/pde.hpp"
#include "kolmo/problem.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace kolmo {

/// Trapezoidal int_0^T <phi(t), 1>_nu dt.
double objective(const ForwardSolution& forward, const GalerkinSystem& system);

/// <g, p(0)>_nu; equals objective() for matching forward/adjoint solves.
double dual_objective(const AdjointSolution& adjoint, const Eigen::VectorXd& g_nodal,
                      const GalerkinSystem& system);

/// d(x) = B* [ int_0^T Q^{1/2} D phi(t, x) p(t, x) dt ] at the nodes (dim x P).
///
/// The time integral uses the same theta-weights as the forward scheme and
/// the staggered adjoint multipliers, so <delta u, d>_nu is the exact
/// directional derivative of the time-discrete objective.
Eigen::MatrixXd gradient_field(const ForwardSolution& forward, const AdjointSolution& adjoint,
                               const GalerkinSystem& system, const BOperator& b);

/// Pointwise radial clip onto the rho-ball.
ControlField project(const Eigen::MatrixXd& v, double rho);

/// r(u) = <u, d>_nu + rho int |d| dnu, the gap of the linearized problem.
/// `d` is the gradient field (B* already applied).
double vi_residual(const ControlField& u, const Eigen::MatrixXd& d, const QuadratureGrid& grid);

/// Minimizer of v -> <v, d>_nu over the rho-ball: -rho d/|d|, 0 where d = 0.
ControlField linear_minimizer(const Eigen::MatrixXd& d, double rho);

enum class Method { projected_gradient, conditional_gradient };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct OptimizeOptions {
    Method method = Method::projected_gradient;
    double tol = 1e-6;
    std::size_t max_iter = 200;
    TimeStepping stepping{.steps = 0, .theta = 0.5, .rescale = false, .check_energy = true};
    int golden_iterations = 30;
    double armijo = 1e-4;
    double min_step = 1e-12;
};

/// Everything computed for one control: objective, adjoint, gradient.
struct ControlEvaluation {
    ControlField control;
    Eigen::MatrixXd coupling;
    ForwardSolution forward;
    AdjointSolution adjoint;
    Eigen::MatrixXd gradient;
    double value = 0.0;
    double dual_value = 0.0;
    double residual = 0.0;
};

double evaluate_objective(const ProblemSpec& problem, const GalerkinSystem& system,
                          const ControlField& u, const TimeStepping& stepping);

ControlEvaluation evaluate_control(const ProblemSpec& problem, const GalerkinSystem& system,
                                   const ControlField& u, const TimeStepping& stepping);

struct IterationRecord {
    double objective = 0.0;
    double residual = 0.0;
    double step = 0.0;
    double duality_gap = 0.0;  // |Phi(u) - <g, p(0)>|
};

struct OptimizationTrace {
    std::vector<IterationRecord> iterates;
    ControlField final_control;
    ForwardSolution final_forward;
    AdjointSolution final_adjoint;
    Eigen::MatrixXd final_gradient;
    bool converged = false;
    std::string message;
    /// "gradient" for symmetric problems, "formal gradient" otherwise.
    std::string gradient_label;
};

/// Minimizes the cost over admissible feedback controls. `system` must have
/// been assembled from `problem`.
OptimizationTrace optimize(const ProblemSpec& problem, const GalerkinSystem& system,
                           const ControlField& u0, const OptimizeOptions& options);

}  // namespace kolmo
