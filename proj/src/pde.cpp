#include "kolmo/pde.hpp"

#include "kolmo/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace kolmo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_stepping(const TimeStepping& s, double horizon) {
    require(s.theta >= 0.5 && s.theta <= 1.0, "theta must lie in [1/2, 1]");
    require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive");
}

void check_coupling(const GalerkinSystem& system, const MatrixXd& coupling) {
    const Index K = static_cast<Index>(system.size());
    require(coupling.rows() == K && coupling.cols() == K, "coupling matrix has the wrong shape");
}

std::vector<double> uniform_times(double horizon, std::size_t steps) {
    std::vector<double> t(steps + 1);
    for (std::size_t s = 0; s <= steps; ++s) {
        t[s] = horizon * static_cast<double>(s) / static_cast<double>(steps);
    }
    return t;
}

double dirichlet_energy(const GalerkinSystem& system, const VectorXd& v) {
    double e = 0.0;
    for (const MatrixXd& g : system.grad_ops) {
        const VectorXd dv = g.transpose() * v;
        e += dv.cwiseAbs2().dot(system.grid.weights);
    }
    return e;
}

}  // namespace

std::size_t default_steps(const GalerkinSystem& system, const MatrixXd& coupling, double horizon) {
    check_coupling(system, coupling);
    const MatrixXd op = system.mass_factor.solve(MatrixXd(system.stiffness + coupling));
    const double norm = spectral_norm(op, 1e-6, 2000);
    const double steps = std::ceil(horizon * norm / 0.5);
    return std::max<std::size_t>(1, static_cast<std::size_t>(steps));
}

ForwardSolution solve_forward(const GalerkinSystem& system, const MatrixXd& coupling,
                              const VectorXd& g_nodal, double horizon, const TimeStepping& stepping) {
    check_stepping(stepping, horizon);
    check_coupling(system, coupling);
    require(g_nodal.size() == static_cast<Index>(system.grid.size()), "objective sample length mismatch");
    if (!g_nodal.allFinite()) numerical_failure("objective g is not finite at some node");

    const std::size_t S = stepping.steps > 0 ? stepping.steps : default_steps(system, coupling, horizon);
    const double h = horizon / static_cast<double>(S);
    const double theta = stepping.theta;
    const MatrixXd op = system.stiffness + coupling;
    const MatrixXd lhs = system.mass - theta * h * op;
    const MatrixXd rhs = system.mass + (1.0 - theta) * h * op;
    Eigen::PartialPivLU<MatrixXd> lu(lhs);

    ForwardSolution sol;
    sol.times = uniform_times(horizon, S);
    sol.theta = theta;
    sol.rescaled = stepping.rescale;
    sol.g_norm = l2_norm({g_nodal.data(), static_cast<std::size_t>(g_nodal.size())}, system.grid);
    sol.coeffs.resize(static_cast<Index>(S + 1), static_cast<Index>(system.size()));

    VectorXd state = system.project(g_nodal);
    sol.coeffs.row(0) = state.transpose();
    const double decay = stepping.rescale ? std::exp(-system.shift * h) : 1.0;
    for (std::size_t s = 0; s < S; ++s) {
        state = lu.solve(decay * (rhs * state));
        if (!state.allFinite()) numerical_failure("forward solve produced non-finite values");
        const double undo = stepping.rescale ? std::exp(system.shift * sol.times[s + 1]) : 1.0;
        sol.coeffs.row(static_cast<Index>(s + 1)) = undo * state.transpose();
    }

    sol.norms.resize(S + 1);
    double prev_energy = 0.0;
    for (std::size_t s = 0; s <= S; ++s) {
        const VectorXd c = sol.coeffs.row(static_cast<Index>(s)).transpose();
        sol.norms[s] = system.norm(c);
        const double e = dirichlet_energy(system, c);
        if (s > 0) sol.energy_integral += 0.5 * h * (prev_energy + e);
        prev_energy = e;
        if (stepping.check_energy) {
            const double bound = std::exp(system.growth_rate * sol.times[s]) * sol.g_norm * (1.0 + 1e-6);
            if (sol.norms[s] > bound + 1e-14) {
                numerical_failure("forward solution violates the energy bound at step " +
                                  std::to_string(s) + "; increase steps or theta");
            }
        }
    }
    return sol;
}

ForwardSolution solve_forward(const GalerkinSystem& system, const MatrixXd& coupling,
                              const ScalarField& g, double horizon, const TimeStepping& stepping) {
    return solve_forward(system, coupling, sample(g, system.grid), horizon, stepping);
}

AdjointSolution solve_adjoint(const GalerkinSystem& system, const MatrixXd& coupling, double horizon,
                              const TimeStepping& stepping) {
    check_stepping(stepping, horizon);
    check_coupling(system, coupling);
    const std::size_t S = stepping.steps > 0 ? stepping.steps : default_steps(system, coupling, horizon);
    const double h = horizon / static_cast<double>(S);
    const double theta = stepping.theta;
    const MatrixXd op = system.stiffness + coupling;
    const MatrixXd lhs_t = (system.mass - theta * h * op).transpose();
    const MatrixXd rhs_t = (system.mass + (1.0 - theta) * h * op).transpose();
    Eigen::PartialPivLU<MatrixXd> lu(lhs_t);
    const VectorXd& b = system.load;
    const Index K = static_cast<Index>(system.size());

    AdjointSolution sol;
    sol.times = uniform_times(horizon, S);
    sol.theta = theta;
    sol.rescaled = stepping.rescale;
    sol.multipliers.resize(static_cast<Index>(S), K);
    sol.coeffs.resize(static_cast<Index>(S + 1), K);

    // Multipliers of the trapezoidal objective h sum_s w_s <phi_s, 1>:
    //   L^T lam_S = h/2 b,  L^T lam_s = R^T lam_{s+1} + h b.
    // With rescaling, mu_s = exp(-shift (T - t_s)) lam_s is propagated instead.
    const double decay = stepping.rescale ? std::exp(-system.shift * h) : 1.0;
    auto source_scale = [&](std::size_t s) {
        return stepping.rescale ? std::exp(-system.shift * (horizon - sol.times[s])) : 1.0;
    };
    auto unscale = [&](std::size_t s) {
        return stepping.rescale ? std::exp(system.shift * (horizon - sol.times[s])) : 1.0;
    };

    VectorXd mu = lu.solve(0.5 * h * source_scale(S) * b);
    sol.multipliers.row(static_cast<Index>(S - 1)) = unscale(S) * mu.transpose();
    for (std::size_t s = S - 1; s >= 1; --s) {
        mu = lu.solve(decay * (rhs_t * mu) + h * source_scale(s) * b);
        if (!mu.allFinite()) numerical_failure("adjoint solve produced non-finite values");
        sol.multipliers.row(static_cast<Index>(s - 1)) = unscale(s) * mu.transpose();
    }

    // Nodal-in-time adjoint: M p_s = R^T lam_{s+1} + h/2 b, p_S = 0. This makes
    // <g, p(0)>_nu equal the trapezoidal objective exactly.
    for (std::size_t s = 0; s < S; ++s) {
        const VectorXd lam = sol.multipliers.row(static_cast<Index>(s)).transpose();
        const VectorXd p = system.mass_factor.solve(VectorXd(rhs_t * lam + 0.5 * h * b));
        sol.coeffs.row(static_cast<Index>(s)) = p.transpose();
    }
    sol.coeffs.row(static_cast<Index>(S)).setZero();
    return sol;
}

double evaluate_at(const GalerkinSystem& system, const MatrixXd& coeffs,
                   const std::vector<double>& times, double t, std::span<const double> x) {
    require(!times.empty() && static_cast<Index>(times.size()) == coeffs.rows(), "time grid mismatch");
    require(t >= times.front() - 1e-12 && t <= times.back() + 1e-12, "time outside the solution grid");
    const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12 * (1.0 + std::abs(t)));
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    if (hi >= times.size()) hi = times.size() - 1;
    VectorXd c = coeffs.row(static_cast<Index>(hi)).transpose();
    if (hi > 0 && std::abs(times[hi] - t) > 1e-12 * (1.0 + std::abs(t))) {
        const std::size_t lo = hi - 1;
        const double a = (t - times[lo]) / (times[hi] - times[lo]);
        c = (1.0 - a) * coeffs.row(static_cast<Index>(lo)).transpose() + a * c;
    }
    return expand_at(system.basis, system.grid.measure.variances, c, x);
}

}  // namespace kolmo
