#include "support.hpp"

#include "kolmo/control.hpp"
#include "kolmo/error.hpp"
#include "kolmo/pde.hpp"

#include <cmath>
#include <random>

using namespace kolmo;
using namespace kolmo::test;

namespace {

Eigen::MatrixXd zero_coupling(const GalerkinSystem& s) {
    const auto k = static_cast<Eigen::Index>(s.size());
    return Eigen::MatrixXd::Zero(k, k);
}

ControlField random_control(const Setup& s, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uni;
    ControlField u = ControlField::zero(s.problem.dim, s.grid.size(), s.problem.rho);
    for (Eigen::Index p = 0; p < u.values.cols(); ++p) {
        for (Eigen::Index k = 0; k < u.values.rows(); ++k) u.values(k, p) = normal(rng);
        u.values.col(p) *= s.problem.rho * uni(rng) / u.values.col(p).norm();
    }
    return u;
}

TimeStepping steps(std::size_t n, double theta = 0.5) {
    TimeStepping t;
    t.steps = n;
    t.theta = theta;
    return t;
}

double at(const Setup& s, const ForwardSolution& f, double t, double x) {
    const std::vector<double> p{x};
    return evaluate_at(s.system, f.coeffs, f.times, t, p);
}

}  // namespace

TEST_CASE("constant data stays constant") {
    const auto s = make_setup(ou_benchmark(1, constant_objective(2.5)), 6);
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd c = assemble_coupling(s.system, s.problem.control, random_control(s, rng));
    const auto f = solve_forward(s.system, c, s.problem.objective, 1.0, steps(50));
    for (Eigen::Index r = 0; r < f.coeffs.rows(); ++r) {
        CHECK(f.coeffs(r, 0) == doctest::Approx(2.5).epsilon(1e-13));
        CHECK(f.coeffs.row(r).tail(f.coeffs.cols() - 1).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("uncontrolled OU semigroup on g(x) = x") {
    const auto s = make_setup(ou_benchmark(), 8);
    const auto f = solve_forward(s.system, zero_coupling(s.system), s.problem.objective, 1.0, steps(2000));
    const double sigma = std::sqrt(s.problem.measure.variances[0]);
    CHECK(f.coeffs(0, 1) == doctest::Approx(sigma).epsilon(1e-14));
    CHECK(std::abs(f.coeffs(2000, 1) / sigma - std::exp(-1.0)) <= 1e-6);
    CHECK(std::abs(at(s, f, 1.0, 1.0) - std::exp(-1.0)) <= 1e-6);
    CHECK(std::abs(at(s, f, 0.5, -2.0) + 2.0 * std::exp(-0.5)) <= 1e-6);
    CHECK(f.steps() == 2000);
    CHECK(f.times.back() == 1.0);
}

TEST_CASE("controlled OU mean with constant control") {
    const auto s = make_setup(ou_benchmark(), 8);
    const double c = -0.6;
    const auto u = ControlField::constant(Eigen::VectorXd::Constant(1, c), s.grid.size(), 1.0);
    const auto f = solve_forward(s.system, assemble_coupling(s.system, s.problem.control, u), s.problem.objective, 1.0,
                                 steps(2000));
    for (double t : {0.25, 0.5, 1.0}) {
        for (double x : {-1.0, 0.0, 0.7}) {
            const double exact = std::exp(-t) * x + c * (1.0 - std::exp(-t));
            CHECK(std::abs(at(s, f, t, x) - exact) <= 1e-6);
        }
    }
}

TEST_CASE("contraction without control and Gronwall bound with control") {
    const auto s = make_setup(ou_benchmark(2, linear_objective({1.0, -0.5})), 6);
    const auto f0 = solve_forward(s.system, zero_coupling(s.system), s.problem.objective, 1.0, steps(200));
    for (std::size_t i = 1; i < f0.norms.size(); ++i) CHECK(f0.norms[i] <= f0.norms[i - 1] + 1e-10);

    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        const auto u = random_control(s, rng);
        const auto f = solve_forward(s.system, assemble_coupling(s.system, s.problem.control, u), s.problem.objective, 1.0,
                                     steps(200));
        for (std::size_t i = 0; i < f.norms.size(); ++i) {
            CHECK(f.norms[i] <= std::exp(s.system.growth_rate * f.times[i]) * f.g_norm * (1.0 + 1e-6));
        }
        CHECK(f.energy_integral >= 0.0);
    }
}

TEST_CASE("Lipschitz stability in the data") {
    const auto s = make_setup(ou_benchmark(), 6);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    const Eigen::MatrixXd c = assemble_coupling(s.system, s.problem.control, random_control(s, rng));
    const double bound = std::exp(s.system.growth_rate * 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd g1(static_cast<Eigen::Index>(s.grid.size())), g2(g1.size());
        for (auto& v : g1) v = normal(rng);
        for (auto& v : g2) v = normal(rng);
        const auto f1 = solve_forward(s.system, c, g1, 1.0, steps(100));
        const auto f2 = solve_forward(s.system, c, g2, 1.0, steps(100));
        const double dg = s.system.norm(s.system.project(g1 - g2));
        double sup = 0.0;
        for (Eigen::Index r = 0; r < f1.coeffs.rows(); ++r) {
            sup = std::max(sup, s.system.norm((f1.coeffs.row(r) - f2.coeffs.row(r)).transpose()));
        }
        CHECK(sup <= bound * dg * (1.0 + 1e-9));
    }
}

TEST_CASE("continuity in the control is first order") {
    const auto s = make_setup(ou_benchmark(), 6);
    std::mt19937_64 rng(8);
    ControlField u = random_control(s, rng);
    u.values *= 0.5;
    ControlField v = random_control(s, rng);
    v.values *= 0.5;
    const auto base = solve_forward(s.system, assemble_coupling(s.system, s.problem.control, u), s.problem.objective, 1.0,
                                    steps(100));
    std::vector<double> dist;
    for (double lambda : {0.4, 0.2, 0.1, 0.05}) {
        ControlField w = u;
        w.values += lambda * v.values;
        const auto f = solve_forward(s.system, assemble_coupling(s.system, s.problem.control, w), s.problem.objective,
                                     1.0, steps(100));
        double sup = 0.0;
        for (Eigen::Index r = 0; r < f.coeffs.rows(); ++r) {
            sup = std::max(sup, s.system.norm((f.coeffs.row(r) - base.coeffs.row(r)).transpose()));
        }
        dist.push_back(sup);
    }
    const double slope = std::log(dist.front() / dist.back()) / std::log(8.0);
    CHECK(slope >= 0.95);
}

TEST_CASE("Richardson ratios of the theta-scheme") {
    const auto s = make_setup(ou_benchmark(1, ObjectiveSpec{ObjectiveSpec::Kind::quadratic, 1.0, {}, {0.3}, 0.0, 0.1}), 6);
    auto final_coeffs = [&](std::size_t n, double theta) {
        return solve_forward(s.system, zero_coupling(s.system), s.problem.objective, 1.0, steps(n, theta))
            .coeffs.row(static_cast<Eigen::Index>(n))
            .transpose()
            .eval();
    };
    const auto a = final_coeffs(20, 0.5), b = final_coeffs(40, 0.5), c = final_coeffs(80, 0.5);
    const double ratio = s.system.norm(a - b) / s.system.norm(b - c);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.125));
    const auto d = final_coeffs(20, 1.0), e = final_coeffs(40, 1.0), f = final_coeffs(80, 1.0);
    CHECK(s.system.norm(d - e) / s.system.norm(e - f) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("uncontrolled adjoint has constant mode T - t and stays nonnegative") {
    const auto s = make_setup(ou_benchmark(), 8);
    const double T = 1.5;
    const auto p = solve_adjoint(s.system, zero_coupling(s.system), T, steps(30));
    for (std::size_t r = 0; r < p.times.size(); ++r) {
        CHECK(p.coeffs(static_cast<Eigen::Index>(r), 0) == doctest::Approx(T - p.times[r]).epsilon(1e-12));
        const Eigen::VectorXd nodal = s.system.nodal(p.coeffs.row(static_cast<Eigen::Index>(r)).transpose());
        CHECK(nodal.minCoeff() >= -1e-12);
    }
    CHECK(p.coeffs.row(30).isZero());
    CHECK(p.multipliers.rows() == 30);
}

TEST_CASE("discrete duality and exact rescaling") {
    for (std::size_t dim : {1u, 2u}) {
        const auto s = make_setup(ou_benchmark(dim), 6);
        std::mt19937_64 rng(21 + dim);
        for (int trial = 0; trial < 3; ++trial) {
            const auto u = random_control(s, rng);
            const Eigen::MatrixXd c = assemble_coupling(s.system, s.problem.control, u);
            const Eigen::VectorXd g = sample(s.problem.objective, s.grid);
            for (double theta : {0.5, 1.0}) {
                const auto f = solve_forward(s.system, c, g, 1.0, steps(64, theta));
                const auto p = solve_adjoint(s.system, c, 1.0, steps(64, theta));
                const double phi = objective(f, s.system);
                CHECK(std::abs(phi - dual_objective(p, g, s.system)) <= 1e-12 * (1.0 + std::abs(phi)));

                TimeStepping rs = steps(64, theta);
                rs.rescale = true;
                const auto fr = solve_forward(s.system, c, g, 1.0, rs);
                const auto pr = solve_adjoint(s.system, c, 1.0, rs);
                CHECK(fr.rescaled);
                CHECK(pr.rescaled);
                CHECK((fr.coeffs - f.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
                CHECK((pr.coeffs.row(0) - p.coeffs.row(0)).lpNorm<Eigen::Infinity>() <= 1e-9);
            }
        }
    }
}

TEST_CASE("default step count respects the step heuristic") {
    const auto s = make_setup(ou_benchmark(), 8);
    const std::size_t n = default_steps(s.system, zero_coupling(s.system), 1.0);
    const Eigen::MatrixXd a = s.system.generator;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    CHECK(1.0 / static_cast<double>(n) * svd.singularValues()(0) <= 0.5 + 1e-6);
    const auto f = solve_forward(s.system, zero_coupling(s.system), s.problem.objective, 1.0);
    CHECK(f.steps() == n);
}

TEST_CASE("argument validation") {
    const auto s = make_setup(ou_benchmark(), 4);
    const auto c = zero_coupling(s.system);
    CHECK_THROWS_AS(solve_forward(s.system, c, s.problem.objective, 1.0, steps(10, 0.4)), Error);
    CHECK_THROWS_AS(solve_forward(s.system, c, s.problem.objective, 1.0, steps(10, 1.1)), Error);
    CHECK_THROWS_AS(solve_forward(s.system, c, s.problem.objective, -1.0, steps(10)), Error);
    CHECK_THROWS_AS(solve_adjoint(s.system, Eigen::MatrixXd::Zero(2, 2), 1.0, steps(10)), Error);
}
