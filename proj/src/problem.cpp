#include "kolmo/problem.hpp"

#include "kolmo/error.hpp"

#include <algorithm>
#include <cmath>

namespace kolmo {

BOperator BOperator::identity() { return {}; }

BOperator BOperator::from_matrix(Eigen::MatrixXd m) {
    require(m.rows() == m.cols() && m.rows() > 0, "control matrix must be square");
    require(m.allFinite(), "control matrix has non-finite entries");
    BOperator b;
    b.kind = Kind::matrix;
    b.matrix = std::move(m);
    return b;
}

BOperator BOperator::finite_rank(std::vector<RankOne> terms) {
    require(!terms.empty(), "finite-rank control operator needs at least one term");
    for (const auto& t : terms) require(static_cast<bool>(t.f) && static_cast<bool>(t.g),
                                        "finite-rank term needs both f and g");
    BOperator b;
    b.kind = Kind::finite_rank;
    b.terms = std::move(terms);
    return b;
}

double spectral_norm(const Eigen::MatrixXd& a, double tol, int max_iter) {
    if (a.size() == 0) return 0.0;
    const Eigen::MatrixXd ata = a.transpose() * a;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(a.cols()).normalized();
    // Deterministic, non-degenerate start: perturb away from symmetric subspaces.
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += 1e-3 * static_cast<double>(i + 1);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd w = ata * v;
        const double next = v.dot(w);
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        v = w / nw;
        if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(std::max(0.0, lambda));
}

double operator_norm(const BOperator& b, const QuadratureGrid& grid) {
    if (b.declared_norm) return *b.declared_norm;
    switch (b.kind) {
        case BOperator::Kind::identity:
            return 1.0;
        case BOperator::Kind::matrix:
            return spectral_norm(b.matrix);
        case BOperator::Kind::finite_rank: {
            const std::size_t n = grid.dim();
            std::vector<double> fx(n), gx(n);
            double bound = 0.0;
            for (const auto& t : b.terms) {
                double l1 = 0.0;
                double linf = 0.0;
                for (std::size_t p = 0; p < grid.size(); ++p) {
                    t.f(grid.node(p), fx);
                    t.g(grid.node(p), gx);
                    double nf = 0.0, ng = 0.0;
                    for (std::size_t k = 0; k < n; ++k) {
                        nf += fx[k] * fx[k];
                        ng += gx[k] * gx[k];
                    }
                    l1 += grid.weights[static_cast<Eigen::Index>(p)] * std::sqrt(nf);
                    linf = std::max(linf, std::sqrt(ng));
                }
                bound += l1 * linf;
            }
            return bound;
        }
    }
    return 0.0;
}

void ProblemSpec::drift(std::span<const double> x, std::span<double> out) const {
    const std::size_t n = dim;
    if (nonlinear_drift) {
        nonlinear_drift(x, out);
    } else {
        std::fill(out.begin(), out.end(), 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += linear_drift(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
        }
        out[i] += s;
    }
}

void ProblemSpec::validate() const {
    require(dim >= 1, "problem dimension must be at least 1");
    require(linear_drift.rows() == static_cast<Eigen::Index>(dim) &&
                linear_drift.cols() == static_cast<Eigen::Index>(dim),
            "linear drift must be dim x dim");
    require(linear_drift.allFinite(), "linear drift has non-finite entries");
    require(noise.size() == dim, "noise must have one entry per dimension");
    for (double q : noise) require(std::isfinite(q) && q > 0.0, "noise entries must be positive");
    require(std::isfinite(rho) && rho > 0.0, "rho must be positive");
    require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive");
    require(static_cast<bool>(objective), "objective g is missing");
    require(measure.dim() == dim, "measure dimension differs from problem dimension");
    measure.validate();
    if (control.kind == BOperator::Kind::matrix) {
        require(control.matrix.rows() == static_cast<Eigen::Index>(dim),
                "control matrix must be dim x dim");
    }
}

ControlField ControlField::zero(std::size_t dim, std::size_t nodes, double rho) {
    return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(nodes)), rho};
}

ControlField ControlField::constant(const Eigen::VectorXd& value, std::size_t nodes, double rho) {
    return {value.replicate(1, static_cast<Eigen::Index>(nodes)), rho};
}

double ControlField::max_norm() const {
    if (values.cols() == 0) return 0.0;
    return values.colwise().norm().maxCoeff();
}

bool ControlField::admissible() const { return max_norm() <= rho * (1.0 + 1e-12); }

void require_admissible(const ControlField& u) {
    require(u.admissible(), "control is not admissible: max |u(x)| = " + std::to_string(u.max_norm()) +
                                " exceeds rho = " + std::to_string(u.rho));
}

}  // namespace kolmo
