#pragma once

#include "kolmo/operator.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace kolmo {

struct TimeStepping {
    /// Number of uniform steps; 0 picks default_steps().
    std::size_t steps = 0;
    /// 1/2 is Crank-Nicolson, 1 is backward Euler.
    double theta = 0.5;
    /// Integrate exp(-shift t) phi instead of phi and undo the scaling.
    bool rescale = false;
    /// Abort when ||phi(t)|| exceeds exp(4 rho^2 ||B||^2 t) ||g|| (1 + 1e-6).
    bool check_energy = true;
};

/// Solution of d phi/dt = N phi + <B u, Q^{1/2} D phi>, phi(0) = g.
struct ForwardSolution {
    std::vector<double> times;
    Eigen::MatrixXd coeffs;  // (S+1) x K, row s is phi(t_s)
    double theta = 0.5;
    bool rescaled = false;
    double g_norm = 0.0;           // ||g||_nu at the nodes
    std::vector<double> norms;     // ||phi(t_s)||_nu
    double energy_integral = 0.0;  // int_0^T sum_k q_k ||d_k phi||^2 dt

    std::size_t steps() const { return times.size() - 1; }
};

/// Solution of dp/dt = -N p - G^u p - 1, p(T) = 0, built as the exact
/// discrete adjoint of the forward theta-scheme.
struct AdjointSolution {
    std::vector<double> times;
    Eigen::MatrixXd coeffs;       // (S+1) x K, row s is p(t_s); row S is zero
    /// Row s-1 holds the multiplier of forward step s (staggered in time,
    /// close to p(t_s - dt/2)). These pair with the forward solution in the
    /// gradient of the time-discrete objective.
    Eigen::MatrixXd multipliers;  // S x K
    double theta = 0.5;
    bool rescaled = false;

    std::size_t steps() const { return times.size() - 1; }
};

/// Smallest S with (T/S) * ||M^{-1}(stiffness + coupling)||_2 <= 0.5.
std::size_t default_steps(const GalerkinSystem& system, const Eigen::MatrixXd& coupling,
                          double horizon);

ForwardSolution solve_forward(const GalerkinSystem& system, const Eigen::MatrixXd& coupling,
                              const Eigen::VectorXd& g_nodal, double horizon,
                              const TimeStepping& stepping = {});
ForwardSolution solve_forward(const GalerkinSystem& system, const Eigen::MatrixXd& coupling,
                              const ScalarField& g, double horizon,
                              const TimeStepping& stepping = {});

AdjointSolution solve_adjoint(const GalerkinSystem& system, const Eigen::MatrixXd& coupling,
                              double horizon, const TimeStepping& stepping = {});

/// phi(t, x) by basis expansion, linear in t between stored steps.
double evaluate_at(const GalerkinSystem& system, const Eigen::MatrixXd& coeffs,
                   const std::vector<double>& times, double t, std::span<const double> x);

}  // namespace kolmo
