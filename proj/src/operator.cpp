#include "kolmo/operator.hpp"

#include "kolmo/error.hpp"
#include "kolmo/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace kolmo {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Everything that does not depend on the drift: basis tables, mass matrix,
// gradient operators, and the control-related constants.
GalerkinSystem prepare(const ProblemSpec& problem, const Basis& basis, const QuadratureGrid& grid,
                       const AssemblyOptions& opts) {
    problem.validate();
    require(basis.dim == problem.dim && grid.dim() == problem.dim,
            "problem, basis and grid dimensions must agree");

    GalerkinSystem sys;
    sys.basis = basis;
    sys.grid = grid;
    sys.noise = problem.noise;
    sys.symmetric = problem.symmetric;
    sys.eval = evaluate(basis, grid);

    const MatrixXd weighted = sys.eval.values * grid.weights.asDiagonal();
    MatrixXd mass = weighted * sys.eval.values.transpose();
    sys.mass = 0.5 * (mass + mass.transpose());
    sys.load = weighted.rowwise().sum();

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sys.mass, Eigen::EigenvaluesOnly);
    sys.mass_min_eigenvalue = eig.eigenvalues().minCoeff();
    const double max_ev = eig.eigenvalues().maxCoeff();
    sys.mass_condition = sys.mass_min_eigenvalue > 0.0 ? max_ev / sys.mass_min_eigenvalue
                                                       : std::numeric_limits<double>::infinity();
    if (!(sys.mass_condition <= opts.max_mass_condition)) {
        numerical_failure("mass matrix condition number " + std::to_string(sys.mass_condition) +
                          " exceeds cap; lower the basis degree or raise the quadrature level");
    }
    sys.mass_factor.compute(sys.mass);
    if (sys.mass_factor.info() != Eigen::Success) numerical_failure("mass matrix is not positive definite");

    for (std::size_t k = 0; k < problem.dim; ++k) {
        sys.grad_ops.push_back(std::sqrt(problem.noise[k]) * sys.eval.gradients[k]);
    }

    sys.rho = problem.rho;
    sys.b_norm = operator_norm(problem.control, grid);
    sys.growth_rate = 4.0 * problem.rho * problem.rho * sys.b_norm * sys.b_norm;
    sys.shift = sys.growth_rate + 1.0;
    return sys;
}

void finish(GalerkinSystem& sys) {
    sys.generator = sys.mass_factor.solve(sys.stiffness);
}

}  // namespace

VectorXd GalerkinSystem::project(const VectorXd& nodal_values) const {
    require(nodal_values.size() == static_cast<Index>(grid.size()), "nodal field length mismatch");
    const VectorXd rhs = eval.values * grid.weights.cwiseProduct(nodal_values);
    return mass_factor.solve(rhs);
}

VectorXd GalerkinSystem::nodal(const VectorXd& coeffs) const {
    return eval.values.transpose() * coeffs;
}

double GalerkinSystem::norm(const VectorXd& coeffs) const {
    return std::sqrt(std::max(0.0, coeffs.dot(mass * coeffs)));
}

GalerkinSystem assemble_generator(const ProblemSpec& problem, const Basis& basis,
                                  const QuadratureGrid& grid, const AssemblyOptions& opts) {
    GalerkinSystem sys = prepare(problem, basis, grid, opts);
    sys.assembly = Assembly::direct;

    const std::size_t n = problem.dim;
    const std::size_t P = grid.size();
    MatrixXd drift(static_cast<Index>(n), static_cast<Index>(P));
    parallel_for(P, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            problem.drift(grid.node(p), {drift.data() + p * n, n});
        }
    });
    if (!drift.allFinite()) numerical_failure("drift is not finite at some quadrature node");

    // Rows of `applied` are N0 phi_j sampled at the nodes.
    MatrixXd applied = MatrixXd::Zero(static_cast<Index>(basis.size()), static_cast<Index>(P));
    for (std::size_t k = 0; k < n; ++k) {
        applied += 0.5 * problem.noise[k] * sys.eval.second_derivatives[k];
        applied += sys.eval.gradients[k] * drift.row(static_cast<Index>(k)).asDiagonal();
    }
    sys.stiffness = (sys.eval.values * grid.weights.asDiagonal()) * applied.transpose();
    finish(sys);
    return sys;
}

GalerkinSystem assemble_dirichlet_form(const ProblemSpec& problem, const Basis& basis,
                                       const QuadratureGrid& grid, const AssemblyOptions& opts) {
    require(problem.symmetric, "Dirichlet-form assembly requires a problem flagged symmetric");
    GalerkinSystem sys = prepare(problem, basis, grid, opts);
    sys.assembly = Assembly::dirichlet_form;

    const Index K = static_cast<Index>(basis.size());
    MatrixXd form = MatrixXd::Zero(K, K);
    for (const MatrixXd& g : sys.grad_ops) {
        form += (g * grid.weights.asDiagonal()) * g.transpose();
    }
    // Mirror the upper triangle so the result is exactly symmetric.
    sys.stiffness = MatrixXd(K, K);
    for (Index j = 0; j < K; ++j) {
        for (Index i = 0; i <= j; ++i) {
            const double v = -0.5 * form(i, j);
            sys.stiffness(i, j) = v;
            sys.stiffness(j, i) = v;
        }
    }
    finish(sys);
    return sys;
}

MatrixXd apply_B(const BOperator& b, const ControlField& u, const QuadratureGrid& grid) {
    const Index n = static_cast<Index>(grid.dim());
    require(u.values.rows() == n && u.values.cols() == static_cast<Index>(grid.size()),
            "control field shape does not match the grid");
    switch (b.kind) {
        case BOperator::Kind::identity:
            return u.values;
        case BOperator::Kind::matrix:
            require(b.matrix.rows() == n, "control matrix dimension mismatch");
            return b.matrix * u.values;
        case BOperator::Kind::finite_rank: {
            MatrixXd out = MatrixXd::Zero(n, u.values.cols());
            for (const auto& t : b.terms) {
                const MatrixXd f = sample(t.f, grid);
                const MatrixXd g = sample(t.g, grid);
                const double c = (f.cwiseProduct(u.values).colwise().sum()).dot(grid.weights);
                out += c * g;
            }
            return out;
        }
    }
    return {};
}

MatrixXd apply_B_adjoint(const BOperator& b, const MatrixXd& v, const QuadratureGrid& grid) {
    const Index n = static_cast<Index>(grid.dim());
    require(v.rows() == n && v.cols() == static_cast<Index>(grid.size()),
            "vector field shape does not match the grid");
    switch (b.kind) {
        case BOperator::Kind::identity:
            return v;
        case BOperator::Kind::matrix:
            return b.matrix.transpose() * v;
        case BOperator::Kind::finite_rank: {
            MatrixXd out = MatrixXd::Zero(n, v.cols());
            for (const auto& t : b.terms) {
                const MatrixXd f = sample(t.f, grid);
                const MatrixXd g = sample(t.g, grid);
                const double c = (g.cwiseProduct(v).colwise().sum()).dot(grid.weights);
                out += c * f;
            }
            return out;
        }
    }
    return {};
}

MatrixXd coupling_matrix(const GalerkinSystem& system, const MatrixXd& field) {
    const Index K = static_cast<Index>(system.size());
    require(field.rows() == static_cast<Index>(system.grid.dim()) &&
                field.cols() == static_cast<Index>(system.grid.size()),
            "coupling field shape does not match the grid");
    MatrixXd out = MatrixXd::Zero(K, K);
    for (std::size_t k = 0; k < system.grad_ops.size(); ++k) {
        const VectorXd scale = system.grid.weights.cwiseProduct(field.row(static_cast<Index>(k)).transpose());
        out += (system.eval.values * scale.asDiagonal()) * system.grad_ops[k].transpose();
    }
    return out;
}

MatrixXd assemble_coupling(const GalerkinSystem& system, const BOperator& b, const ControlField& u) {
    require_admissible(u);
    return coupling_matrix(system, apply_B(b, u, system.grid));
}

namespace {

VectorXd inverse_basis_norms(const GalerkinSystem& sys) {
    return sys.mass.diagonal().cwiseSqrt().cwiseInverse();
}

}  // namespace

CertificationReport certify_identities(const GalerkinSystem& system,
                                       const std::optional<MatrixXd>& coupling,
                                       std::size_t random_vectors, std::uint64_t seed) {
    CertificationReport rep;
    rep.assembly = system.assembly;
    rep.symmetric_flag = system.symmetric;
    rep.mass_min_eigenvalue = system.mass_min_eigenvalue;
    rep.mass_condition = system.mass_condition;
    rep.random_vectors = random_vectors;

    const Index K = static_cast<Index>(system.size());
    const VectorXd inv = inverse_basis_norms(system);
    const MatrixXd scaled = inv.asDiagonal() * system.stiffness * inv.asDiagonal();

    // Constant function has unit norm, so row 0 of `scaled` is <1, N0 phi_j / |phi_j|>.
    rep.invariance_residual = scaled.row(0).cwiseAbs().maxCoeff();
    rep.symmetry_residual = (scaled - scaled.transpose()).cwiseAbs().maxCoeff();
    rep.constant_residual = system.generator.col(0).cwiseAbs().maxCoeff();

    std::vector<VectorXd> tests;
    for (Index j = 0; j < K; ++j) tests.push_back(VectorXd::Unit(K, j) * inv[j]);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<VectorXd> randoms;
    for (std::size_t r = 0; r < random_vectors; ++r) {
        VectorXd v(K);
        for (Index j = 0; j < K; ++j) v[j] = normal(rng) * inv[j];
        v /= system.norm(v);
        randoms.push_back(v);
        tests.push_back(v);
    }

    rep.max_dissipation = -std::numeric_limits<double>::infinity();
    for (const VectorXd& v : tests) {
        const double form = v.dot(system.stiffness * v);
        double energy = 0.0;
        for (const MatrixXd& g : system.grad_ops) {
            const VectorXd dv = g.transpose() * v;
            energy += dv.cwiseAbs2().dot(system.grid.weights);
        }
        rep.ibp_residual = std::max(rep.ibp_residual, std::abs(form + 0.5 * energy));
        rep.max_dissipation = std::max(rep.max_dissipation, form);
    }

    if (coupling) {
        rep.has_coupling = true;
        const double kappa = system.rho * system.rho * system.b_norm * system.b_norm;
        rep.norm_bound = std::max(4.0, 1.0 + 64.0 * kappa * kappa);
        const MatrixXd nu = system.mass_factor.solve(MatrixXd(system.stiffness + *coupling));
        rep.norm_ratio_min = std::numeric_limits<double>::infinity();
        rep.norm_ratio_max = 0.0;
        for (const VectorXd& v : randoms) {
            const double vv = system.norm(v);
            const double a = system.norm(nu * v);
            const double b = system.norm(system.generator * v);
            const double ratio = (a * a + vv * vv) / (b * b + vv * vv);
            rep.norm_ratio_min = std::min(rep.norm_ratio_min, ratio);
            rep.norm_ratio_max = std::max(rep.norm_ratio_max, ratio);
        }
        if (randoms.empty()) rep.norm_ratio_min = rep.norm_ratio_max = 1.0;
        rep.norm_equivalence_ok = rep.norm_ratio_min >= 1.0 / rep.norm_bound &&
                                  rep.norm_ratio_max <= rep.norm_bound;
    }
    return rep;
}

double assembly_discrepancy(const GalerkinSystem& a, const GalerkinSystem& b) {
    require(a.size() == b.size(), "systems have different basis sizes");
    const VectorXd inv = inverse_basis_norms(a);
    const MatrixXd diff = inv.asDiagonal() * (a.stiffness - b.stiffness) * inv.asDiagonal();
    return diff.cwiseAbs().maxCoeff();
}

}  // namespace kolmo
