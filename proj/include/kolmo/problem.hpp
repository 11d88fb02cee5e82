#pragma once

#include "kolmo/fields.hpp"
#include "kolmo/measure.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace kolmo {

/// Bounded control operator B: H -> H.
struct BOperator {
    enum class Kind { identity, matrix, finite_rank };

    /// One rank-one piece u -> (integral <u, f> dnu) g.
    struct RankOne {
        VectorField f;
        VectorField g;
    };

    Kind kind = Kind::identity;
    Eigen::MatrixXd matrix;
    std::vector<RankOne> terms;
    std::optional<double> declared_norm;

    static BOperator identity();
    static BOperator from_matrix(Eigen::MatrixXd m);
    static BOperator finite_rank(std::vector<RankOne> terms);
};

/// Largest singular value by power iteration on A^T A.
double spectral_norm(const Eigen::MatrixXd& a, double tol = 1e-10, int max_iter = 10'000);

/// Upper bound for ||B|| used by the growth constants: 1 for the identity,
/// the spectral norm for a matrix, and sum_j ||f_j||_{L1(nu)} ||g_j||_{Linf(nu)}
/// on the grid for a finite-rank operator. A declared norm takes precedence.
double operator_norm(const BOperator& b, const QuadratureGrid& grid);

/// Controlled SDE  dX = (A X + F(X)) dt + Q^{1/2} B u(X) dt + Q^{1/2} dW
/// with cost  int_0^T int E g(X^u(t, x)) nu(dx) dt.
struct ProblemSpec {
    std::string name;
    std::size_t dim = 0;
    Eigen::MatrixXd linear_drift;
    VectorField nonlinear_drift;  // empty means F == 0
    std::vector<double> noise;    // diagonal of Q
    BOperator control;
    double rho = 1.0;
    ScalarField objective;
    double horizon = 1.0;
    MeasureSpec measure;
    bool symmetric = false;

    /// A x + F(x)
    void drift(std::span<const double> x, std::span<double> out) const;

    /// Checks shapes and ranges; throws Error(validation).
    void validate() const;
};

/// Feedback control sampled at quadrature nodes; column i is u(x_i).
struct ControlField {
    Eigen::MatrixXd values;  // dim x P
    double rho = 1.0;

    static ControlField zero(std::size_t dim, std::size_t nodes, double rho);
    static ControlField constant(const Eigen::VectorXd& value, std::size_t nodes, double rho);

    double max_norm() const;
    bool admissible() const;
};

/// Throws Error(validation) when some node violates |u(x)| <= rho (1 + 1e-12).
void require_admissible(const ControlField& u);

}  // namespace kolmo
