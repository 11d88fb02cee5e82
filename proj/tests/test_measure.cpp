#include "kolmo/error.hpp"
#include "kolmo/measure.hpp"

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

using namespace kolmo;

namespace {

// E[x^k] for N(0, var), from the recursion m_k = (k-1) var m_{k-2}.
double gaussian_moment(int k, double var) {
    if (k % 2 == 1) return 0.0;
    double m = 1.0;
    for (int j = 2; j <= k; j += 2) m *= (j - 1) * var;
    return m;
}

ScalarField quartic(double lambda) {
    return {[lambda](std::span<const double> x) { return lambda * std::pow(x[0], 4) / 4.0; }, "quartic"};
}

std::span<const double> sp(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST_CASE("level-5 Gaussian rule is symmetric and normalized") {
    const auto grid = build_grid(MeasureSpec::gaussian({1.0}), 5);
    REQUIRE(grid.size() == 5);
    CHECK(grid.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(grid.node(i)[0] == doctest::Approx(-grid.node(4 - i)[0]).epsilon(1e-14));
        CHECK(grid.weights(static_cast<Eigen::Index>(i)) > 0.0);
    }
    double second = 0.0;
    for (std::size_t i = 0; i < 5; ++i) second += grid.weights(static_cast<Eigen::Index>(i)) * std::pow(grid.node(i)[0], 2);
    CHECK(second == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Gauss-Hermite level L integrates degree <= 2L-1 exactly") {
    for (double var : {1.0, 0.5, 3.0}) {
        for (int level = 2; level <= 16; ++level) {
            const auto grid = build_grid(MeasureSpec::gaussian({var}), level);
            CHECK(std::abs(grid.weights.sum() - 1.0) <= 1e-10);
            for (int k = 0; k <= 2 * level - 1; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    s += grid.weights(static_cast<Eigen::Index>(i)) * std::pow(grid.node(i)[0], k);
                }
                const double exact = gaussian_moment(k, var);
                // Odd moments vanish; measure their error against E|x|^k.
                const double scale = std::max(1.0, gaussian_moment(k + k % 2, var));
                INFO("var=" << var << " level=" << level << " k=" << k);
                CHECK(std::abs(s - exact) <= 1e-12 * scale);
            }
        }
    }
}

TEST_CASE("tensor grid in 2-D: node count and mixed moments") {
    const std::vector<int> levels{4, 6};
    const auto grid = build_grid(MeasureSpec::gaussian({1.0, 0.5}), levels);
    REQUIRE(grid.size() == 24);
    double m = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto x = grid.node(i);
        m += grid.weights(static_cast<Eigen::Index>(i)) * x[0] * x[0] * std::pow(x[1], 4);
    }
    CHECK(m == doctest::Approx(1.0 * 3.0 * 0.25).epsilon(1e-13));
}

TEST_CASE("Gibbs partition function matches an adaptive quadrature oracle") {
    const auto grid = build_grid(MeasureSpec::gibbs({1.0}, quartic(1.0)), 40);
    boost::math::quadrature::sinh_sinh<double> integrator;
    const double oracle = integrator.integrate([](double x) {
        return std::exp(-0.5 * x * x - 0.5 * std::pow(x, 4)) / std::sqrt(2.0 * M_PI);
    });
    CHECK(std::abs(std::exp(grid.log_partition) - oracle) <= 1e-8);
    CHECK(std::abs(grid.weights.sum() - 1.0) <= 1e-10);
    CHECK(partition_stabilization(MeasureSpec::gibbs({1.0}, quartic(1.0)), 40) <= 1e-6);
}

TEST_CASE("Gibbs weights reproduce the fourth moment of the oracle density") {
    const auto grid = build_grid(MeasureSpec::gibbs({1.0}, quartic(1.0)), 40);
    boost::math::quadrature::sinh_sinh<double> integrator;
    auto density = [](double x) { return std::exp(-0.5 * x * x - 0.5 * std::pow(x, 4)); };
    const double z = integrator.integrate(density);
    const double m2 = integrator.integrate([&](double x) { return x * x * density(x); }) / z;
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += grid.weights(static_cast<Eigen::Index>(i)) * std::pow(grid.node(i)[0], 2);
    CHECK(s == doctest::Approx(m2).epsilon(1e-8));
}

TEST_CASE("inner products") {
    const auto grid = build_grid(MeasureSpec::gaussian({1.0}), 6);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(6);
    const Eigen::VectorXd x = grid.nodes.row(0).transpose();
    const Eigen::VectorXd x3 = x.array().cube();
    CHECK(inner_product(sp(one), sp(one), grid) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(inner_product(sp(x), sp(x), grid) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(inner_product(sp(x), sp(x3), grid) == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(inner_product(sp(x), sp(x3), grid) == doctest::Approx(inner_product(sp(x3), sp(x), grid)));
    CHECK(l2_norm(sp(x), grid) == doctest::Approx(1.0).epsilon(1e-13));
    const Eigen::VectorXd shorter = Eigen::VectorXd::Ones(5);
    CHECK_THROWS_AS(inner_product(sp(one), sp(shorter), grid), Error);
}

TEST_CASE("grid construction errors") {
    CHECK_THROWS_AS(build_grid(MeasureSpec::gaussian({1.0}), 1), Error);
    CHECK_THROWS_AS(build_grid(MeasureSpec::gaussian({0.0}), 4), Error);
    GridLimits small;
    small.node_budget = 100;
    CHECK_THROWS_AS(build_grid(MeasureSpec::gaussian({1.0, 1.0, 1.0}), 5, small), Error);
    const ScalarField bad{[](std::span<const double>) { return std::nan(""); }, "nan"};
    CHECK_THROWS_AS(build_grid(MeasureSpec::gibbs({1.0}, bad), 5), Error);
    const ScalarField huge{[](std::span<const double>) { return 1e6; }, "huge"};
    CHECK_THROWS_AS(build_grid(MeasureSpec::gibbs({1.0}, huge), 5), Error);
}

TEST_CASE("nearest node lookup") {
    const auto grid = build_grid(MeasureSpec::gaussian({1.0, 1.0}), 5);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(nearest_node(grid, grid.node(i)) == i);
    const std::vector<double> far{100.0, -100.0};
    const auto j = nearest_node(grid, far);
    CHECK(grid.node(j)[0] == doctest::Approx(grid.axis_nodes[0].back()));
    CHECK(grid.node(j)[1] == doctest::Approx(grid.axis_nodes[1].front()));
}

TEST_CASE("grid cache round-trips bit for bit") {
    const auto dir = std::filesystem::temp_directory_path() / "kolmo_grid_cache_test";
    std::filesystem::remove_all(dir);
    ::setenv("KOLMO_CACHE_DIR", dir.c_str(), 1);
    auto m = MeasureSpec::gibbs({1.0}, quartic(1.0));
    m.cache_key = "test-quartic";
    const std::vector<int> levels{12};
    const auto a = build_grid_cached(m, levels);
    CHECK(!std::filesystem::is_empty(dir));
    const auto b = build_grid_cached(m, levels);
    ::unsetenv("KOLMO_CACHE_DIR");
    CHECK(a.nodes == b.nodes);
    CHECK(a.weights == b.weights);
    CHECK(a.log_partition == b.log_partition);
    std::filesystem::remove_all(dir);
}
