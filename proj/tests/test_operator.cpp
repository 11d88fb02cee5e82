#include "support.hpp"

#include "kolmo/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

using namespace kolmo;
using namespace kolmo::test;

namespace {

ControlField random_control(std::size_t dim, std::size_t nodes, double rho, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uni;
    ControlField u = ControlField::zero(dim, nodes, rho);
    for (Eigen::Index p = 0; p < u.values.cols(); ++p) {
        for (Eigen::Index k = 0; k < u.values.rows(); ++k) u.values(k, p) = normal(rng);
        u.values.col(p) *= rho * uni(rng) / std::max(1e-300, u.values.col(p).norm());
    }
    return u;
}

}  // namespace

TEST_CASE("1-D OU generator has spectrum {0, -1, ..., -d}") {
    const auto s = make_setup(ou_benchmark(), 8);
    Eigen::EigenSolver<Eigen::MatrixXd> eig(s.system.generator);
    std::vector<double> ev;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        CHECK(std::abs(eig.eigenvalues()(i).imag()) <= 1e-10);
        ev.push_back(eig.eigenvalues()(i).real());
    }
    std::sort(ev.begin(), ev.end());
    for (int k = 0; k <= 8; ++k) CHECK(ev[static_cast<std::size_t>(8 - k)] == doctest::Approx(-k).epsilon(1e-10));
}

TEST_CASE("generator kills constants and maps x to -x") {
    const auto s = make_setup(ou_benchmark(), 6);
    CHECK(s.system.generator.col(0).lpNorm<Eigen::Infinity>() <= 1e-10);
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(7);
    e1(1) = 1.0;  // He_1(x / sigma) is proportional to x
    const Eigen::VectorXd image = s.system.generator * e1;
    CHECK((image + e1).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("Dirichlet-form assembly agrees with direct assembly on OU") {
    for (std::size_t dim : {1u, 2u}) {
        const auto direct = make_setup(ou_benchmark(dim), 8);
        const auto form = make_setup(ou_benchmark(dim), 8, 0, Assembly::dirichlet_form);
        CHECK(assembly_discrepancy(direct.system, form.system) <= 1e-8);
        const Eigen::MatrixXd& mn = form.system.stiffness;
        CHECK((mn - mn.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(mn.row(0).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(mn.col(0).lpNorm<Eigen::Infinity>() == 0.0);
    }
}

TEST_CASE("Dirichlet-form assembly needs the symmetric flag") {
    ReactionDiffusionPreset rd;
    const auto p = build_preset(rd, 1.0, 1.0, linear_objective({1.0, 0.0, 0.0}));
    const auto grid = build_grid(p.measure, 4);
    CHECK_THROWS_AS(assemble_dirichlet_form(p, build_basis(3, 2), grid), Error);
}

TEST_CASE("assembly errors") {
    auto p = ou_benchmark();
    const auto grid = build_grid(p.measure, 10);
    const auto basis = build_basis(1, 8);
    AssemblyOptions strict;
    strict.max_mass_condition = 10.0;
    try {
        assemble_generator(p, basis, grid, strict);
        FAIL("expected a numerical failure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numerical);
    }
    p.nonlinear_drift = VectorField{[](std::span<const double>, std::span<double> out) { out[0] = INFINITY; }, "inf"};
    CHECK_THROWS_AS(assemble_generator(p, basis, grid), Error);
    CHECK_THROWS_AS(assemble_generator(ou_benchmark(2), basis, grid), Error);
}

TEST_CASE("apply_B examples") {
    const auto grid = build_grid(MeasureSpec::gaussian({0.5, 0.5}), 4);
    const std::size_t P = grid.size();
    Eigen::VectorXd e1(2);
    e1 << 1.0, 0.0;
    const ControlField u = ControlField::constant(e1, P, 1.0);

    CHECK(apply_B(BOperator::identity(), u, grid) == u.values);

    std::vector<BOperator::RankOne> terms;
    terms.push_back({constant_vector({1.0, 0.0}), constant_vector({1.0, 0.0})});
    const auto fr = BOperator::finite_rank(terms);
    const Eigen::MatrixXd out = apply_B(fr, u, grid);
    CHECK((out - u.values).lpNorm<Eigen::Infinity>() <= 1e-14);
    CHECK(operator_norm(fr, grid) == doctest::Approx(1.0));

    const auto twice = BOperator::from_matrix(2.0 * Eigen::MatrixXd::Identity(2, 2));
    CHECK((apply_B(twice, u, grid) - 2.0 * u.values).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(operator_norm(twice, grid) == doctest::Approx(2.0).epsilon(1e-9));

    BOperator declared = BOperator::identity();
    declared.declared_norm = 3.0;
    CHECK(operator_norm(declared, grid) == 3.0);
}

TEST_CASE("B* is the L2(nu) adjoint of B") {
    const auto grid = build_grid(MeasureSpec::gaussian({0.5, 1.0}), 5);
    std::mt19937_64 rng(3);
    Eigen::MatrixXd a(2, 2);
    a << 1.0, -2.0, 0.5, 0.3;
    std::vector<BOperator::RankOne> terms;
    Polynomial px(2, {{1.0, {1, 0}}});
    Polynomial py2(2, {{1.0, {0, 2}}, {-0.5, {0, 0}}});
    Polynomial one(2, {{1.0, {0, 0}}});
    terms.push_back({polynomial_vector_field({px, one}, "f"), polynomial_vector_field({py2, px}, "g")});
    terms.push_back({polynomial_vector_field({one, py2}, "f2"), constant_vector({0.2, -1.0})});
    for (const auto& b : {BOperator::identity(), BOperator::from_matrix(a), BOperator::finite_rank(terms)}) {
        const ControlField u = random_control(2, grid.size(), 1.0, rng);
        const Eigen::MatrixXd v = random_control(2, grid.size(), 5.0, rng).values;
        const Eigen::MatrixXd bu = apply_B(b, u, grid);
        const Eigen::MatrixXd bv = apply_B_adjoint(b, v, grid);
        const double lhs = (bu.cwiseProduct(v).colwise().sum()).dot(grid.weights);
        const double rhs = (u.values.cwiseProduct(bv).colwise().sum()).dot(grid.weights);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("coupling matrix") {
    const auto s = make_setup(ou_benchmark(), 6);
    const std::size_t P = s.grid.size();
    const BOperator id = BOperator::identity();

    CHECK(assemble_coupling(s.system, id, ControlField::zero(1, P, 1.0)).isZero());

    // Oracle: <phi_i, c phi_j'> by quadrature on a finer grid with Hermite recurrences.
    const double c = -0.7;
    const Eigen::MatrixXd mc = assemble_coupling(s.system, id, ControlField::constant(Eigen::VectorXd::Constant(1, c), P, 1.0));
    CHECK(mc.col(0).isZero());
    const auto fine = build_grid(s.problem.measure, 20);
    const double sigma = std::sqrt(s.problem.measure.variances[0]);
    for (int i = 0; i <= 6; ++i) {
        for (int j = 0; j <= 6; ++j) {
            double sum = 0.0;
            for (std::size_t p = 0; p < fine.size(); ++p) {
                const auto he = hermite_values(6, fine.node(p)[0] / sigma);
                const double dj = j == 0 ? 0.0 : j * he[static_cast<std::size_t>(j - 1)] / sigma;
                sum += fine.weights(static_cast<Eigen::Index>(p)) * he[static_cast<std::size_t>(i)] * c * dj;
            }
            CHECK(std::abs(mc(i, j) - sum) <= 1e-10 * std::max(1.0, std::abs(sum)));
        }
    }

    std::mt19937_64 rng(5);
    const ControlField u1 = random_control(1, P, 1.0, rng);
    const ControlField u2 = random_control(1, P, 1.0, rng);
    ControlField mix = u1;
    mix.values = 0.3 * u1.values + 0.6 * u2.values;
    const Eigen::MatrixXd lin = 0.3 * assemble_coupling(s.system, id, u1) + 0.6 * assemble_coupling(s.system, id, u2);
    CHECK((assemble_coupling(s.system, id, mix) - lin).lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + lin.lpNorm<Eigen::Infinity>()));

    ControlField bad = u1;
    bad.values(0, 0) = 1.0 + 1e-9;
    CHECK_THROWS_AS(assemble_coupling(s.system, id, bad), Error);
}

TEST_CASE("certification on OU presets") {
    for (std::size_t dim : {1u, 2u}) {
        const auto s = make_setup(ou_benchmark(dim), 8);
        const auto r = certify_identities(s.system);
        CHECK(r.invariance_residual <= 1e-8);
        CHECK(r.ibp_residual <= 1e-8);
        CHECK(r.constant_residual <= 1e-10);
        CHECK(r.max_dissipation <= 1e-8);
        CHECK(r.symmetry_residual <= 1e-8);
        CHECK(r.random_vectors == 100);

        const auto zero = certify_identities(s.system, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.system.size()),
                                                                             static_cast<Eigen::Index>(s.system.size())));
        CHECK(zero.norm_ratio_min == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(zero.norm_ratio_max == doctest::Approx(1.0).epsilon(1e-14));

        std::mt19937_64 rng(17);
        const auto u = random_control(dim, s.grid.size(), 1.0, rng);
        const auto rc = certify_identities(s.system, assemble_coupling(s.system, BOperator::identity(), u));
        CHECK(rc.has_coupling);
        CHECK(rc.norm_equivalence_ok);
        CHECK(rc.norm_ratio_min >= 1.0 / rc.norm_bound);
        CHECK(rc.norm_ratio_max <= rc.norm_bound);
    }
    const auto form = make_setup(ou_benchmark(), 8, 0, Assembly::dirichlet_form);
    CHECK(certify_identities(form.system).ibp_residual <= 1e-13);
}

TEST_CASE("discrete dissipativity on random vectors") {
    const auto s = make_setup(ou_benchmark(2), 6);
    std::mt19937_64 rng(23);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(s.system.size()));
        for (auto& x : v) x = normal(rng);
        const double n2 = v.dot(s.system.mass * v);
        CHECK(v.dot(s.system.stiffness * v) <= 1e-8 * n2);
    }
}
