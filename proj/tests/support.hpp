#pragma once

#include "kolmo/basis.hpp"
#include "kolmo/measure.hpp"
#include "kolmo/operator.hpp"
#include "kolmo/problems.hpp"

#include <doctest.h>

namespace kolmo::test {

struct Setup {
    ProblemSpec problem;
    QuadratureGrid grid;
    Basis basis;
    GalerkinSystem system;
};

inline Setup make_setup(ProblemSpec problem, int max_degree, int level = 0,
                        Assembly assembly = Assembly::direct) {
    Setup s;
    s.problem = std::move(problem);
    if (level == 0) level = max_degree + 2;
    const std::vector<int> levels(s.problem.dim, level);
    s.grid = build_grid(s.problem.measure, levels);
    s.basis = build_basis(s.problem.dim, max_degree);
    s.system = assembly == Assembly::direct ? assemble_generator(s.problem, s.basis, s.grid)
                                            : assemble_dirichlet_form(s.problem, s.basis, s.grid);
    return s;
}

inline ObjectiveSpec linear_objective(std::vector<double> c) {
    ObjectiveSpec o;
    o.kind = ObjectiveSpec::Kind::linear;
    o.c = std::move(c);
    return o;
}

inline ObjectiveSpec constant_objective(double v) {
    ObjectiveSpec o;
    o.kind = ObjectiveSpec::Kind::constant;
    o.value = v;
    return o;
}

/// The 1-D OU benchmark: A = -1, q = 1, B = Id, rho = 1, T = 1, g(x) = x.
inline ProblemSpec ou_benchmark(std::size_t dim = 1, ObjectiveSpec g = linear_objective({})) {
    OuPreset p;
    p.dim = dim;
    return build_preset(p, 1.0, 1.0, g);
}

}  // namespace kolmo::test
