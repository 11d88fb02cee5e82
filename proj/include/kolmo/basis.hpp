#pragma once

#include "kolmo/measure.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace kolmo {

using MultiIndex = std::vector<int>;

/// Tensor Hermite basis of total degree <= max_degree, graded
/// lexicographic order. Index 0 is the constant function.
struct Basis {
    std::size_t dim = 0;
    int max_degree = 0;
    std::vector<MultiIndex> indices;

    std::size_t size() const { return indices.size(); }
};

struct BasisLimits {
    std::size_t max_size = 20'000;
};

Basis build_basis(std::size_t dim, int max_degree, const BasisLimits& limits = {});

/// Basis values and derivatives sampled at a set of points. Every matrix
/// is K x P; gradients[k] holds d/dx_k and second_derivatives[k] d^2/dx_k^2.
struct BasisEval {
    Eigen::MatrixXd values;
    std::vector<Eigen::MatrixXd> gradients;
    std::vector<Eigen::MatrixXd> second_derivatives;
};

/// He_alpha(x / sigma) with sigma^2 the per-coordinate variances, at the
/// columns of `points` (dim x P).
BasisEval evaluate(const Basis& basis, std::span<const double> variances,
                   const Eigen::MatrixXd& points, bool with_second_derivatives = true);

BasisEval evaluate(const Basis& basis, const QuadratureGrid& grid);

/// Probabilists' Hermite He_0..He_n at x via the three-term recurrence.
std::vector<double> hermite_values(int n, double x);

/// Expansion sum_j coeffs_j phi_j evaluated at one point.
double expand_at(const Basis& basis, std::span<const double> variances,
                 const Eigen::VectorXd& coeffs, std::span<const double> x);

}  // namespace kolmo
