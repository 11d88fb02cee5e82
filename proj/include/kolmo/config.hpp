#pragma once

#include "kolmo/control.hpp"
#include "kolmo/operator.hpp"
#include "kolmo/problem.hpp"
#include "kolmo/sde.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kolmo {

inline constexpr int kConfigVersion = 1;

struct DiscretizationConfig {
    int max_degree = 8;
    int quad_level = 0;  // 0 means max_degree + 2
    std::size_t steps = 0;
    double theta = 0.5;
    bool rescale = false;
    Assembly assembly = Assembly::direct;

    int effective_quad_level() const { return quad_level > 0 ? quad_level : max_degree + 2; }
    TimeStepping stepping() const { return {steps, theta, rescale, true}; }
};

struct OptimizeConfig {
    Method method = Method::projected_gradient;
    double tol = 1e-6;
    std::size_t max_iter = 200;
    std::size_t multistart = 1;
};

/// Which feedback control the forward/adjoint/simulate/verify commands use.
struct ControlChoice {
    enum class Kind { zero, constant, optimized };
    Kind kind = Kind::zero;
    std::vector<double> value;
    ControlPolicy::Interpolation interpolation = ControlPolicy::Interpolation::nearest_node;
};

struct VerifyConfig {
    std::size_t n_paths = 10'000;
    double dt = 1e-3;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> probes;
    SimulationMode mode = SimulationMode::girsanov;
    InitialLaw x0;
    bool dump_paths = false;
};

struct RunConfig {
    ProblemSpec problem;
    DiscretizationConfig discretization;
    OptimizeConfig optimize;
    ControlChoice control;
    VerifyConfig verify;
    std::string output_dir = "out";
    nlohmann::json source;
};

/// Parses and validates a config document. Unknown fields, a missing or
/// wrong "version", and out-of-range numbers raise Error(validation).
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Polynomial from [{"coeff": c, "powers": [..]}, ...].
Polynomial parse_polynomial(const nlohmann::json& terms, std::size_t dim);

}  // namespace kolmo
