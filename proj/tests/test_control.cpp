#include "support.hpp"

#include "kolmo/control.hpp"
#include "kolmo/error.hpp"
#include "kolmo/pde.hpp"

#include <cmath>
#include <random>

using namespace kolmo;
using namespace kolmo::test;

namespace {

TimeStepping steps(std::size_t n) {
    TimeStepping t;
    t.steps = n;
    return t;
}

Eigen::MatrixXd random_field(std::size_t dim, std::size_t nodes, double radius, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uni;
    Eigen::MatrixXd v(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(nodes));
    for (Eigen::Index p = 0; p < v.cols(); ++p) {
        for (Eigen::Index k = 0; k < v.rows(); ++k) v(k, p) = normal(rng);
        v.col(p) *= radius * uni(rng) / v.col(p).norm();
    }
    return v;
}

double weighted_norm_integral(const Eigen::MatrixXd& d, const QuadratureGrid& grid) {
    return d.colwise().norm().dot(grid.weights);
}

}  // namespace

TEST_CASE("objective examples") {
    {
        const auto s = make_setup(ou_benchmark(1, constant_objective(3.0)), 4);
        const auto ev = evaluate_control(s.problem, s.system, ControlField::zero(1, s.grid.size(), 1.0), steps(40));
        CHECK(ev.value == doctest::Approx(3.0).epsilon(1e-13));
        CHECK(ev.gradient.isZero());
    }
    const auto s = make_setup(ou_benchmark(), 8);
    const std::size_t P = s.grid.size();
    CHECK(std::abs(evaluate_objective(s.problem, s.system, ControlField::zero(1, P, 1.0), steps(100))) <= 1e-14);
    for (double c : {-1.0, 0.4}) {
        const auto u = ControlField::constant(Eigen::VectorXd::Constant(1, c), P, 1.0);
        const double expected = c * std::exp(-1.0);  // c (T - 1 + e^{-T}) at T = 1
        CHECK(std::abs(evaluate_objective(s.problem, s.system, u, steps(2000)) - expected) <= 1e-6);
    }
}

TEST_CASE("gradient matches central differences of the objective") {
    for (std::size_t dim : {1u, 2u}) {
        const auto s = make_setup(ou_benchmark(dim), 6);
        const std::size_t P = s.grid.size();
        std::mt19937_64 rng(100 + dim);
        ControlField u = ControlField::zero(dim, P, 1.0);
        u.values = random_field(dim, P, 0.5, rng);
        const auto ev = evaluate_control(s.problem, s.system, u, steps(80));
        CHECK(std::abs(ev.value - ev.dual_value) <= 1e-12);
        const double eps = 1e-4;
        for (int t = 0; t < 10; ++t) {
            const Eigen::MatrixXd du = random_field(dim, P, 0.5, rng);
            ControlField up = u, um = u;
            up.values += eps * du;
            um.values -= eps * du;
            const double fd = (evaluate_objective(s.problem, s.system, up, steps(80)) -
                               evaluate_objective(s.problem, s.system, um, steps(80))) / (2.0 * eps);
            const double an = du.cwiseProduct(ev.gradient).colwise().sum().dot(s.grid.weights);
            CHECK(std::abs(fd - an) <= 1e-5);
        }
    }
}

TEST_CASE("gradient is linear in the adjoint") {
    const auto s = make_setup(ou_benchmark(), 6);
    const auto ev = evaluate_control(s.problem, s.system, ControlField::zero(1, s.grid.size(), 1.0), steps(50));
    AdjointSolution twice = ev.adjoint;
    twice.coeffs *= 2.0;
    twice.multipliers *= 2.0;
    const Eigen::MatrixXd d2 = gradient_field(ev.forward, twice, s.system, s.problem.control);
    CHECK((d2 - 2.0 * ev.gradient).lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + ev.gradient.lpNorm<Eigen::Infinity>()));

    AdjointSolution shorter = ev.adjoint;
    shorter.times.pop_back();
    CHECK_THROWS_AS(gradient_field(ev.forward, shorter, s.system, s.problem.control), Error);
}

TEST_CASE("projection onto the ball") {
    Eigen::MatrixXd v(2, 3);
    v << 3.0, 0.1, 0.0,
         4.0, 0.2, 0.0;
    const ControlField u = project(v, 1.0);
    CHECK(u.values(0, 0) == doctest::Approx(0.6));
    CHECK(u.values(1, 0) == doctest::Approx(0.8));
    CHECK(u.values.col(1) == v.col(1));
    CHECK(u.values.col(2).isZero());
    CHECK(u.admissible());
    CHECK(u.rho == 1.0);
}

TEST_CASE("variational-inequality residual") {
    const auto grid = build_grid(MeasureSpec::gaussian({0.5, 0.5}), 5);
    const std::size_t P = grid.size();
    std::mt19937_64 rng(31);
    const double rho = 0.8;
    const Eigen::MatrixXd d = random_field(2, P, 3.0, rng);
    ControlField u = ControlField::zero(2, P, rho);
    u.values = random_field(2, P, rho, rng);
    CHECK(vi_residual(u, Eigen::MatrixXd::Zero(2, static_cast<Eigen::Index>(P)), grid) == 0.0);

    const ControlField best = linear_minimizer(d, rho);
    CHECK(std::abs(vi_residual(best, d, grid)) <= 1e-14);
    ControlField worst = best;
    worst.values = -best.values;
    CHECK(vi_residual(worst, d, grid) == doctest::Approx(2.0 * rho * weighted_norm_integral(d, grid)).epsilon(1e-13));
    for (int t = 0; t < 50; ++t) {
        u.values = random_field(2, P, rho, rng);
        CHECK(vi_residual(u, d, grid) >= -1e-12);
    }
    u.values(0, 0) = 2.0 * rho;
    CHECK_THROWS_AS(vi_residual(u, d, grid), Error);

    Eigen::MatrixXd with_zero = d;
    with_zero.col(3).setZero();
    CHECK(linear_minimizer(with_zero, rho).values.col(3).isZero());
}

TEST_CASE("optimizer stops immediately on constant data") {
    const auto s = make_setup(ou_benchmark(1, constant_objective(2.0)), 6);
    OptimizeOptions opt;
    opt.stepping = steps(50);
    for (Method m : {Method::projected_gradient, Method::conditional_gradient}) {
        opt.method = m;
        const auto tr = optimize(s.problem, s.system, ControlField::zero(1, s.grid.size(), 1.0), opt);
        CHECK(tr.iterates.size() == 1);
        CHECK(tr.converged);
        CHECK(tr.iterates[0].objective == doctest::Approx(2.0).epsilon(1e-13));
        CHECK(tr.final_control.values.isZero());
    }
}

TEST_CASE("optimizer on the OU benchmark") {
    const auto s = make_setup(ou_benchmark(), 8);
    const std::size_t P = s.grid.size();
    OptimizeOptions opt;
    opt.stepping = steps(200);
    double values[2] = {0.0, 0.0};
    int i = 0;
    for (Method m : {Method::projected_gradient, Method::conditional_gradient}) {
        opt.method = m;
        const auto tr = optimize(s.problem, s.system, ControlField::zero(1, P, 1.0), opt);
        CHECK(tr.converged);
        CHECK(tr.gradient_label == "gradient");
        CHECK(tr.iterates.back().residual <= 1e-6);
        CHECK(tr.iterates.back().objective <= -std::exp(-1.0) + 1e-6);
        for (std::size_t k = 1; k < tr.iterates.size(); ++k) {
            CHECK(tr.iterates[k].objective <= tr.iterates[k - 1].objective);
            CHECK(tr.iterates[k].duality_gap <= 1e-10);
        }
        CHECK(tr.final_control.admissible());
        for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(P); ++p) {
            const double dn = std::abs(tr.final_gradient(0, p));
            if (dn >= 1e-6) CHECK(std::abs(tr.final_control.values(0, p) + tr.final_gradient(0, p) / dn) <= 1e-3);
        }
        values[i++] = tr.iterates.back().objective;
    }
    CHECK(std::abs(values[0] - values[1]) <= 1e-5);
}

TEST_CASE("method names") {
    CHECK(parse_method("projected_gradient") == Method::projected_gradient);
    CHECK(parse_method("conditional_gradient") == Method::conditional_gradient);
    CHECK(to_string(Method::conditional_gradient) == "conditional_gradient");
    CHECK_THROWS_AS(parse_method("newton"), Error);
}
