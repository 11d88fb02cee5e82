#pragma once

#include "kolmo/problem.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace kolmo {

/// dX = -diag(a) X dt + Q^{1/2} B u dt + Q^{1/2} dW, nu = N(0, q / (2a)).
struct OuPreset {
    std::size_t dim = 1;
    std::vector<double> decay;  // a_k > 0, defaults to 1
    std::vector<double> noise;  // q_k > 0, defaults to 1
};

enum class PotentialKind { quartic, double_well };

/// dX = (-diag(a) X - grad U(X)) dt + B u dt + dW with
/// nu = Z^{-1} exp(-2U) N(0, 1 / (2a)).
struct GradientSystemPreset {
    std::size_t dim = 1;
    PotentialKind potential = PotentialKind::quartic;
    double strength = 1.0;      // lambda in lambda x^4 / 4 or lambda (x^2 - 1)^2 / 4
    std::vector<double> decay;  // defaults to 1
};

/// Finite-difference reaction-diffusion on m interior points of [0, 1]:
/// dX = (Delta_h X - p(X)) dt + B u dt + dW, p applied componentwise.
///
/// The state is expressed in the orthonormal eigenbasis of the discrete
/// Dirichlet Laplacian (discrete sine modes), where the linear drift is
/// diagonal and nu is the Gibbs measure of V(x) = sum_i P(x_i), P' = p.
struct ReactionDiffusionPreset {
    std::size_t grid_points = 3;
    std::vector<double> reaction{0.0, 0.0, 0.0, 1.0};  // p(s) = sum_k reaction[k] s^k
};

using PresetId = std::variant<OuPreset, GradientSystemPreset, ReactionDiffusionPreset>;

/// Objective library.
struct ObjectiveSpec {
    enum class Kind { constant, linear, quadratic, cosine, smoothed_indicator };
    Kind kind = Kind::linear;
    double value = 1.0;          // constant
    std::vector<double> c;       // linear / cosine / indicator direction, defaults to e_1
    std::vector<double> center;  // quadratic, defaults to 0
    double threshold = 0.0;      // indicator: sigmoid((<c,x> - threshold) / width)
    double width = 0.1;
};

ScalarField make_objective(const ObjectiveSpec& spec, std::size_t dim);

ProblemSpec build_preset(const PresetId& id, double rho, double horizon, const ObjectiveSpec& objective,
                         BOperator control = BOperator::identity());

/// Polynomial potential for the gradient-system preset.
Polynomial potential_polynomial(PotentialKind kind, std::size_t dim, double strength);

/// (m+1)^2 tridiag(1, -2, 1).
Eigen::MatrixXd dirichlet_laplacian(std::size_t m);

/// Orthonormal eigenvectors (columns) and eigenvalues of dirichlet_laplacian(m).
struct LaplacianModes {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd eigenvalues;  // negative
};
LaplacianModes laplacian_modes(std::size_t m);

/// Largest <b(x) - b(y), x - y> over seeded pairs drawn from the base
/// Gaussian of nu (<= 0 for dissipative drifts).
double dissipativity_defect(const ProblemSpec& problem, std::size_t pairs = 1000,
                            std::uint64_t seed = 7);

}  // namespace kolmo
