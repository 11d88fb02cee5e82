#include "kolmo/problems.hpp"

#include "kolmo/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

namespace kolmo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<double> or_ones(std::vector<double> v, std::size_t n, const char* what) {
    if (v.empty()) v.assign(n, 1.0);
    require(v.size() == n, std::string(what) + " must have one entry per dimension");
    for (double x : v) require(std::isfinite(x) && x > 0.0, std::string(what) + " entries must be positive");
    return v;
}

std::vector<double> unit_or(std::vector<double> v, std::size_t n, const char* what) {
    if (v.empty()) {
        v.assign(n, 0.0);
        v[0] = 1.0;
    }
    require(v.size() == n, std::string(what) + " must have one entry per dimension");
    return v;
}

double dot(const std::vector<double>& c, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * x[k];
    return s;
}

std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

}  // namespace

ScalarField make_objective(const ObjectiveSpec& spec, std::size_t dim) {
    switch (spec.kind) {
        case ObjectiveSpec::Kind::constant:
            return constant_scalar(spec.value);
        case ObjectiveSpec::Kind::linear: {
            auto c = unit_or(spec.c, dim, "objective direction");
            return {[c](std::span<const double> x) { return dot(c, x); }, "linear"};
        }
        case ObjectiveSpec::Kind::quadratic: {
            auto a = spec.center.empty() ? std::vector<double>(dim, 0.0) : spec.center;
            require(a.size() == dim, "objective center must have one entry per dimension");
            return {[a](std::span<const double> x) {
                        double s = 0.0;
                        for (std::size_t k = 0; k < a.size(); ++k) s += (x[k] - a[k]) * (x[k] - a[k]);
                        return s;
                    },
                    "quadratic"};
        }
        case ObjectiveSpec::Kind::cosine: {
            auto c = unit_or(spec.c, dim, "objective direction");
            return {[c](std::span<const double> x) { return std::cos(dot(c, x)); }, "cosine"};
        }
        case ObjectiveSpec::Kind::smoothed_indicator: {
            auto c = unit_or(spec.c, dim, "objective direction");
            require(spec.width > 0.0, "indicator width must be positive");
            const double t = spec.threshold, w = spec.width;
            return {[c, t, w](std::span<const double> x) { return 1.0 / (1.0 + std::exp(-(dot(c, x) - t) / w)); },
                    "smoothed_indicator"};
        }
    }
    return {};
}

Polynomial potential_polynomial(PotentialKind kind, std::size_t dim, double strength) {
    std::vector<Polynomial::Term> terms;
    for (std::size_t k = 0; k < dim; ++k) {
        auto mono = [&](double c, int p) {
            std::vector<int> powers(dim, 0);
            powers[k] = p;
            terms.push_back({c, powers});
        };
        if (kind == PotentialKind::quartic) {
            mono(strength / 4.0, 4);
        } else {
            // (x^2 - 1)^2 / 4 = x^4/4 - x^2/2 + 1/4
            mono(strength / 4.0, 4);
            mono(-strength / 2.0, 2);
            mono(strength / 4.0, 0);
        }
    }
    return Polynomial(dim, std::move(terms));
}

MatrixXd dirichlet_laplacian(std::size_t m) {
    require(m >= 1, "reaction-diffusion needs at least one grid point");
    const double scale = static_cast<double>((m + 1) * (m + 1));
    MatrixXd a = MatrixXd::Zero(static_cast<Index>(m), static_cast<Index>(m));
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        a(i, i) = -2.0 * scale;
        if (i > 0) a(i, i - 1) = scale;
        if (i + 1 < static_cast<Index>(m)) a(i, i + 1) = scale;
    }
    return a;
}

LaplacianModes laplacian_modes(std::size_t m) {
    LaplacianModes modes;
    const Index n = static_cast<Index>(m);
    modes.vectors.resize(n, n);
    modes.eigenvalues.resize(n);
    const double h = 1.0 / static_cast<double>(m + 1);
    for (Index k = 0; k < n; ++k) {
        const double kk = static_cast<double>(k + 1);
        const double s = std::sin(0.5 * kk * std::numbers::pi * h);
        modes.eigenvalues[k] = -4.0 * s * s / (h * h);
        for (Index j = 0; j < n; ++j) {
            modes.vectors(j, k) = std::sqrt(2.0 * h) * std::sin(static_cast<double>(j + 1) * kk * std::numbers::pi * h);
        }
    }
    return modes;
}

namespace {

ProblemSpec build_ou(const OuPreset& p) {
    require(p.dim >= 1, "OU dimension must be at least 1");
    const auto a = or_ones(p.decay, p.dim, "decay rates");
    const auto q = or_ones(p.noise, p.dim, "noise");
    ProblemSpec spec;
    spec.name = "ou";
    spec.dim = p.dim;
    spec.linear_drift = MatrixXd::Zero(static_cast<Index>(p.dim), static_cast<Index>(p.dim));
    std::vector<double> var(p.dim);
    for (std::size_t k = 0; k < p.dim; ++k) {
        spec.linear_drift(static_cast<Index>(k), static_cast<Index>(k)) = -a[k];
        var[k] = q[k] / (2.0 * a[k]);
    }
    spec.noise = q;
    spec.measure = MeasureSpec::gaussian(var);
    spec.measure.cache_key = "gaussian";
    // Diagonal drift commutes with diagonal Q and nu is its invariant Gaussian.
    spec.symmetric = true;
    return spec;
}

ProblemSpec build_gradient(const GradientSystemPreset& p) {
    require(p.dim >= 1, "gradient-system dimension must be at least 1");
    require(std::isfinite(p.strength) && p.strength > 0.0, "potential strength must be positive");
    const auto a = or_ones(p.decay, p.dim, "decay rates");
    const Polynomial u = potential_polynomial(p.potential, p.dim, p.strength);
    ProblemSpec spec;
    spec.name = "gradient_system";
    spec.dim = p.dim;
    spec.linear_drift = MatrixXd::Zero(static_cast<Index>(p.dim), static_cast<Index>(p.dim));
    std::vector<double> var(p.dim);
    for (std::size_t k = 0; k < p.dim; ++k) {
        spec.linear_drift(static_cast<Index>(k), static_cast<Index>(k)) = -a[k];
        var[k] = 1.0 / (2.0 * a[k]);
    }
    spec.nonlinear_drift = negative_gradient_field(u, "-grad U");
    spec.noise.assign(p.dim, 1.0);
    const std::string kind = p.potential == PotentialKind::quartic ? "quartic" : "double_well";
    spec.measure = MeasureSpec::gibbs(var, u.as_field(kind), 0.0);
    std::ostringstream key;
    key.precision(17);
    key << "gibbs:" << kind << ':' << p.strength;
    spec.measure.cache_key = key.str();
    spec.symmetric = true;
    return spec;
}

ProblemSpec build_reaction_diffusion(const ReactionDiffusionPreset& p) {
    const std::size_t m = p.grid_points;
    require(m >= 1 && m <= 4, "reaction-diffusion grid_points must be in [1, 4]");
    require(!p.reaction.empty(), "reaction polynomial p is empty");
    const std::vector<double> coef = p.reaction;
    auto react = [coef](double s) {
        double v = 0.0;
        for (std::size_t k = coef.size(); k-- > 0;) v = v * s + coef[k];
        return v;
    };
    auto react_prime = [coef](double s) {
        double v = 0.0;
        for (std::size_t k = coef.size(); k-- > 1;) v = v * s + static_cast<double>(k) * coef[k];
        return v;
    };
    auto antiderivative = [coef](double s) {
        double v = 0.0;
        for (std::size_t k = coef.size(); k-- > 0;) v = v * s + coef[k] / static_cast<double>(k + 1);
        return v * s;
    };
    for (int i = -2000; i <= 2000; ++i) {
        const double s = 0.005 * i;
        require(react_prime(s) >= -1e-12, "reaction term p must be nondecreasing (p' >= 0)");
    }
    // P is convex; its minimum sits at the root of p.
    double lo = -1e3, hi = 1e3;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (react(mid) < 0.0 ? lo : hi) = mid;
    }
    const double p_min = std::min(0.0, antiderivative(0.5 * (lo + hi)));

    const LaplacianModes modes = laplacian_modes(m);
    auto basis = std::make_shared<const MatrixXd>(modes.vectors);
    ProblemSpec spec;
    spec.name = "reaction_diffusion";
    spec.dim = m;
    spec.linear_drift = modes.eigenvalues.asDiagonal();
    spec.nonlinear_drift = {[basis, react](std::span<const double> y, std::span<double> out) {
                                const Index n = basis->rows();
                                const VectorXd x = *basis * Eigen::Map<const VectorXd>(y.data(), n);
                                VectorXd px(n);
                                for (Index i = 0; i < n; ++i) px[i] = react(x[i]);
                                Eigen::Map<VectorXd>(out.data(), n) = -(basis->transpose() * px);
                            },
                            "-V^T p(V y)"};
    spec.noise.assign(m, 1.0);
    std::vector<double> var(m);
    for (std::size_t k = 0; k < m; ++k) var[k] = -1.0 / (2.0 * modes.eigenvalues[static_cast<Index>(k)]);
    ScalarField potential{[basis, antiderivative](std::span<const double> y) {
                              const Index n = basis->rows();
                              const VectorXd x = *basis * Eigen::Map<const VectorXd>(y.data(), n);
                              double s = 0.0;
                              for (Index i = 0; i < n; ++i) s += antiderivative(x[i]);
                              return s;
                          },
                          "sum_i P(x_i)"};
    spec.measure = MeasureSpec::gibbs(var, potential, static_cast<double>(m) * p_min);
    spec.measure.cache_key = "reaction_diffusion:" + std::to_string(m) + ":" + join(coef);
    // Only the direct assembly is used for this preset; its invariance
    // residual is reported rather than asserted.
    spec.symmetric = false;
    return spec;
}

}  // namespace

ProblemSpec build_preset(const PresetId& id, double rho, double horizon, const ObjectiveSpec& objective,
                         BOperator control) {
    require(std::isfinite(rho) && rho > 0.0, "rho must be positive");
    require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive");
    ProblemSpec spec = std::visit(
        [](const auto& p) -> ProblemSpec {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, OuPreset>) return build_ou(p);
            else if constexpr (std::is_same_v<T, GradientSystemPreset>) return build_gradient(p);
            else return build_reaction_diffusion(p);
        },
        id);
    require(spec.dim <= GridLimits{}.max_dim,
            "preset dimension exceeds the cap of " + std::to_string(GridLimits{}.max_dim));
    spec.rho = rho;
    spec.horizon = horizon;
    spec.objective = make_objective(objective, spec.dim);
    spec.control = std::move(control);
    spec.validate();
    return spec;
}

double dissipativity_defect(const ProblemSpec& problem, std::size_t pairs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const std::size_t n = problem.dim;
    std::vector<double> x(n), y(n), bx(n), by(n);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pairs; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const double s = 3.0 * std::sqrt(problem.measure.variances[k]);
            x[k] = s * normal(rng);
            y[k] = s * normal(rng);
        }
        problem.drift(x, bx);
        problem.drift(y, by);
        double d = 0.0;
        for (std::size_t k = 0; k < n; ++k) d += (bx[k] - by[k]) * (x[k] - y[k]);
        worst = std::max(worst, d);
    }
    return worst;
}

}  // namespace kolmo
