#include "kolmo/basis.hpp"

#include "kolmo/error.hpp"
#include "kolmo/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace kolmo {

namespace {

void enumerate(std::size_t dim, int remaining, MultiIndex& current, std::size_t pos,
               std::vector<MultiIndex>& out) {
    if (pos + 1 == dim) {
        current[pos] = remaining;
        out.push_back(current);
        return;
    }
    for (int a = remaining; a >= 0; --a) {
        current[pos] = a;
        enumerate(dim, remaining - a, current, pos + 1, out);
    }
}

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

}  // namespace

Basis build_basis(std::size_t dim, int max_degree, const BasisLimits& limits) {
    require(dim >= 1, "basis dimension must be at least 1");
    require(max_degree >= 1, "basis degree must be at least 1");
    const double count = binomial(dim + static_cast<std::size_t>(max_degree), dim);
    require(count <= static_cast<double>(limits.max_size),
            "basis size " + std::to_string(static_cast<long long>(count)) + " exceeds cap " +
                std::to_string(limits.max_size));
    Basis basis;
    basis.dim = dim;
    basis.max_degree = max_degree;
    MultiIndex current(dim, 0);
    for (int d = 0; d <= max_degree; ++d) enumerate(dim, d, current, 0, basis.indices);
    return basis;
}

std::vector<double> hermite_values(int n, double x) {
    std::vector<double> h(static_cast<std::size_t>(n) + 1);
    h[0] = 1.0;
    if (n >= 1) h[1] = x;
    for (int k = 1; k < n; ++k) h[k + 1] = x * h[k] - k * h[k - 1];
    return h;
}

BasisEval evaluate(const Basis& basis, std::span<const double> variances,
                   const Eigen::MatrixXd& points, bool with_second_derivatives) {
    const std::size_t dim = basis.dim;
    require(variances.size() == dim && static_cast<std::size_t>(points.rows()) == dim,
            "basis dimension does not match evaluation points");
    const auto K = static_cast<Eigen::Index>(basis.size());
    const Eigen::Index P = points.cols();
    const int d = basis.max_degree;

    BasisEval ev;
    ev.values.resize(K, P);
    ev.gradients.assign(dim, Eigen::MatrixXd(K, P));
    if (with_second_derivatives) ev.second_derivatives.assign(dim, Eigen::MatrixXd(K, P));

    std::vector<double> sigma(dim);
    for (std::size_t k = 0; k < dim; ++k) sigma[k] = std::sqrt(variances[k]);

    parallel_for(static_cast<std::size_t>(P), [&](std::size_t lo, std::size_t hi) {
        // table[k][a] = He_a(x_k / sigma_k), and derivative tables via
        // He_a' = a He_{a-1}.
        std::vector<std::vector<double>> h(dim), dh(dim), d2h(dim);
        for (std::size_t p = lo; p < hi; ++p) {
            for (std::size_t k = 0; k < dim; ++k) {
                const double s = sigma[k];
                h[k] = hermite_values(d, points(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) / s);
                dh[k].assign(d + 1, 0.0);
                d2h[k].assign(d + 1, 0.0);
                for (int a = 1; a <= d; ++a) dh[k][a] = a * h[k][a - 1] / s;
                for (int a = 2; a <= d; ++a) d2h[k][a] = a * (a - 1) * h[k][a - 2] / (s * s);
            }
            const auto col = static_cast<Eigen::Index>(p);
            for (Eigen::Index j = 0; j < K; ++j) {
                const MultiIndex& alpha = basis.indices[static_cast<std::size_t>(j)];
                double v = 1.0;
                for (std::size_t k = 0; k < dim; ++k) v *= h[k][alpha[k]];
                ev.values(j, col) = v;
                for (std::size_t k = 0; k < dim; ++k) {
                    double g = dh[k][alpha[k]];
                    double g2 = d2h[k][alpha[k]];
                    for (std::size_t m = 0; m < dim; ++m) {
                        if (m == k) continue;
                        g *= h[m][alpha[m]];
                        g2 *= h[m][alpha[m]];
                    }
                    ev.gradients[k](j, col) = g;
                    if (with_second_derivatives) ev.second_derivatives[k](j, col) = g2;
                }
            }
        }
    });
    return ev;
}

BasisEval evaluate(const Basis& basis, const QuadratureGrid& grid) {
    require(basis.dim == grid.dim(), "basis and grid dimensions differ");
    return evaluate(basis, grid.measure.variances, grid.nodes);
}

double expand_at(const Basis& basis, std::span<const double> variances,
                 const Eigen::VectorXd& coeffs, std::span<const double> x) {
    require(static_cast<std::size_t>(coeffs.size()) == basis.size(), "coefficient length mismatch");
    require(x.size() == basis.dim, "point dimension mismatch");
    std::vector<std::vector<double>> h(basis.dim);
    for (std::size_t k = 0; k < basis.dim; ++k) {
        h[k] = hermite_values(basis.max_degree, x[k] / std::sqrt(variances[k]));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j) {
        double v = coeffs[static_cast<Eigen::Index>(j)];
        for (std::size_t k = 0; k < basis.dim; ++k) v *= h[k][basis.indices[j][k]];
        sum += v;
    }
    return sum;
}

}  // namespace kolmo
