#pragma once

#include "kolmo/fields.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace kolmo {

/// Invariant measure nu on R^n.
///
/// `gaussian`: centered product Gaussian with the given per-coordinate
/// variances. `gibbs`: Z^{-1} exp(-2U(x)) times that product Gaussian. The
/// Gaussian part is always the reference measure the Hermite basis and the
/// quadrature are built on.
struct MeasureSpec {
    enum class Kind { gaussian, gibbs };

    Kind kind = Kind::gaussian;
    std::vector<double> variances;
    ScalarField potential;
    /// Lower bound on U; the Gibbs rejection sampler accepts with
    /// probability exp(-2(U - bound)).
    double potential_lower_bound = 0.0;
    /// Stable identifier used for on-disk grid caching. Empty disables it.
    std::string cache_key;

    static MeasureSpec gaussian(std::vector<double> variances);
    static MeasureSpec gibbs(std::vector<double> base_variances, ScalarField potential,
                             double potential_lower_bound = 0.0);

    std::size_t dim() const { return variances.size(); }
    void validate() const;
};

/// Gauss-Hermite rule for the standard normal law (weights sum to one).
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussHermiteRule gauss_hermite(int level);

struct GridLimits {
    std::size_t max_dim = 6;
    std::size_t node_budget = 10'000'000;
};

/// Full tensor quadrature for nu. Node i is column i of `nodes`.
struct QuadratureGrid {
    MeasureSpec measure;
    std::vector<int> levels;
    std::vector<std::vector<double>> axis_nodes;  // unscaled per-axis nodes times sigma
    Eigen::MatrixXd nodes;                        // dim x P
    Eigen::VectorXd weights;                      // P, sums to 1
    double log_partition = 0.0;                   // log Z, zero for Gaussian nu
    /// Gibbs grids are built on N(0, proposal_scale * variances); 1 otherwise.
    double proposal_scale = 1.0;

    std::size_t dim() const { return static_cast<std::size_t>(nodes.rows()); }
    std::size_t size() const { return static_cast<std::size_t>(nodes.cols()); }
    std::span<const double> node(std::size_t i) const {
        return {nodes.data() + i * nodes.rows(), static_cast<std::size_t>(nodes.rows())};
    }
};

QuadratureGrid build_grid(const MeasureSpec& measure, std::span<const int> levels,
                          const GridLimits& limits = {});
QuadratureGrid build_grid(const MeasureSpec& measure, int level, const GridLimits& limits = {});

/// Like build_grid, but reads/writes a binary cache under $KOLMO_CACHE_DIR
/// when both the variable and `measure.cache_key` are set.
QuadratureGrid build_grid_cached(const MeasureSpec& measure, std::span<const int> levels,
                                 const GridLimits& limits = {});

/// Relative change |Z(L) - Z(2L)| / Z(2L) of the Gibbs partition function.
/// Zero for Gaussian measures.
double partition_stabilization(const MeasureSpec& measure, int level);

/// sum_i w_i f(x_i) g(x_i)
double inner_product(std::span<const double> f, std::span<const double> g,
                     const QuadratureGrid& grid);

Eigen::VectorXd sample(const ScalarField& f, const QuadratureGrid& grid);
/// Samples an R^n-valued field at the nodes; result is dim x P.
Eigen::MatrixXd sample(const VectorField& f, const QuadratureGrid& grid);

/// L2(nu) norm of a node-sampled scalar.
double l2_norm(std::span<const double> f, const QuadratureGrid& grid);

/// Index of the grid node closest to x (coordinate-wise on the tensor axes).
std::size_t nearest_node(const QuadratureGrid& grid, std::span<const double> x);

}  // namespace kolmo
