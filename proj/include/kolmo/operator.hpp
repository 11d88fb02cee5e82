#pragma once

#include "kolmo/basis.hpp"
#include "kolmo/measure.hpp"
#include "kolmo/problem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace kolmo {

enum class Assembly { direct, dirichlet_form };

/// Galerkin discretization of the Kolmogorov operator on one basis/grid.
///
/// Coefficient vectors v represent v(x) = sum_j v_j phi_j(x). The matrix
/// `stiffness` is M N, i.e. stiffness(i, j) = <phi_i, N0 phi_j>_nu, and
/// `generator` is N itself.
struct GalerkinSystem {
    Basis basis;
    QuadratureGrid grid;
    BasisEval eval;
    std::vector<double> noise;
    Assembly assembly = Assembly::direct;
    bool symmetric = false;  // copied from the problem

    Eigen::MatrixXd mass;
    Eigen::MatrixXd stiffness;
    Eigen::MatrixXd generator;
    /// grad_ops[k](i, p) = sqrt(q_k) d_k phi_i(x_p)
    std::vector<Eigen::MatrixXd> grad_ops;
    /// load(i) = <phi_i, 1>_nu
    Eigen::VectorXd load;
    Eigen::LLT<Eigen::MatrixXd> mass_factor;

    double mass_min_eigenvalue = 0.0;
    double mass_condition = 0.0;

    double rho = 1.0;
    double b_norm = 1.0;
    /// 4 rho^2 ||B||^2, the Gronwall rate of the controlled semigroup.
    double growth_rate = 0.0;
    /// 4 rho^2 ||B||^2 + 1
    double shift = 1.0;

    std::size_t size() const { return basis.size(); }

    /// M^{-1} <phi_i, f>_nu for node-sampled f.
    Eigen::VectorXd project(const Eigen::VectorXd& nodal) const;
    /// Node values of a coefficient vector.
    Eigen::VectorXd nodal(const Eigen::VectorXd& coeffs) const;
    /// ||v||_nu for a coefficient vector.
    double norm(const Eigen::VectorXd& coeffs) const;
};

struct AssemblyOptions {
    double max_mass_condition = 1e12;
};

/// Projects N0 phi = 1/2 sum_k q_k d_kk phi + <A x + F(x), D phi> by quadrature.
GalerkinSystem assemble_generator(const ProblemSpec& problem, const Basis& basis,
                                  const QuadratureGrid& grid, const AssemblyOptions& opts = {});

/// Symmetric assembly from the Dirichlet form -1/2 sum_k q_k <d_k phi_i, d_k phi_j>_nu.
GalerkinSystem assemble_dirichlet_form(const ProblemSpec& problem, const Basis& basis,
                                       const QuadratureGrid& grid, const AssemblyOptions& opts = {});

/// B u at the nodes (dim x P).
Eigen::MatrixXd apply_B(const BOperator& b, const ControlField& u, const QuadratureGrid& grid);
/// L2(nu)-adjoint B* applied to a node-sampled vector field.
Eigen::MatrixXd apply_B_adjoint(const BOperator& b, const Eigen::MatrixXd& v,
                                const QuadratureGrid& grid);

/// Galerkin matrix of phi -> <b(x), Q^{1/2} D phi(x)> for a node-sampled
/// vector field b, in the same M-weighted convention as `stiffness`.
Eigen::MatrixXd coupling_matrix(const GalerkinSystem& system, const Eigen::MatrixXd& field);

/// M C(u): entry (i, j) = <phi_i, <B u, Q^{1/2} D phi_j>>_nu. Rejects
/// inadmissible u.
Eigen::MatrixXd assemble_coupling(const GalerkinSystem& system, const BOperator& b,
                                  const ControlField& u);

struct CertificationReport {
    Assembly assembly = Assembly::direct;
    bool symmetric_flag = false;
    /// max_j |<1, N0 phi_j>| over unit-norm basis functions
    double invariance_residual = 0.0;
    /// max_v |v^T M N v + 1/2 sum_k q_k ||d_k v||^2| over unit-norm v
    double ibp_residual = 0.0;
    /// max |S - S^T| with S the diagonally normalized stiffness
    double symmetry_residual = 0.0;
    /// largest v^T M N v over unit-norm test vectors (<= 0 up to quadrature error)
    double max_dissipation = 0.0;
    /// ||N e0||_inf
    double constant_residual = 0.0;
    double mass_min_eigenvalue = 0.0;
    double mass_condition = 0.0;

    bool has_coupling = false;
    double norm_ratio_min = 1.0;
    double norm_ratio_max = 1.0;
    double norm_bound = 1.0;
    bool norm_equivalence_ok = true;

    std::size_t random_vectors = 0;
};

/// Checks the discrete operator identities. `coupling` is an optional
/// M C(u) used for the graph-norm equivalence check.
CertificationReport certify_identities(const GalerkinSystem& system,
                                       const std::optional<Eigen::MatrixXd>& coupling = std::nullopt,
                                       std::size_t random_vectors = 100,
                                       std::uint64_t seed = 20240601);

/// max_ij |S1 - S2| after normalizing both stiffness matrices by the
/// basis-function norms.
double assembly_discrepancy(const GalerkinSystem& a, const GalerkinSystem& b);

}  // namespace kolmo
