#pragma once

#include "kolmo/operator.hpp"
#include "kolmo/pde.hpp"
#include "kolmo/problem.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kolmo {

enum class SimulationMode { direct, girsanov };

SimulationMode parse_mode(const std::string& name);
std::string to_string(SimulationMode m);

struct InitialLaw {
    enum class Kind { fixed, sampled_from_measure };
    Kind kind = Kind::sampled_from_measure;
    std::vector<double> point;

    static InitialLaw fixed(std::vector<double> x) { return {Kind::fixed, std::move(x)}; }
    static InitialLaw from_measure() { return {}; }
};

/// Off-grid evaluation of x -> B u(x) for a node-sampled feedback control.
class ControlPolicy {
public:
    enum class Interpolation { nearest_node, polynomial_fit };

    /// u == 0.
    explicit ControlPolicy(std::size_t dim);
    /// `system` is needed for polynomial_fit only (its basis is reused).
    ControlPolicy(const ProblemSpec& problem, const QuadratureGrid& grid, const ControlField& u,
                  Interpolation interpolation = Interpolation::nearest_node,
                  const GalerkinSystem* system = nullptr);

    bool is_zero() const { return zero_; }
    void operator()(std::span<const double> x, std::span<double> bu) const;

private:
    std::size_t dim_ = 0;
    bool zero_ = true;
    Interpolation interp_ = Interpolation::nearest_node;
    QuadratureGrid grid_;
    BOperator b_;
    double rho_ = 1.0;
    Eigen::MatrixXd nodal_;          // dim x P (B u at the nodes for nearest-node lookup)
    Eigen::MatrixXd fit_coeffs_;     // dim x K for polynomial_fit
    Basis basis_;
    std::vector<double> variances_;
    std::vector<double> rank_coeffs_;  // finite-rank: c_j = <u, f_j>_nu
};

struct SimulationOptions {
    std::size_t n_paths = 1000;
    double dt = 1e-3;
    std::uint64_t seed = 0;
    SimulationMode mode = SimulationMode::direct;
    InitialLaw x0;
    /// Record every `record_stride` steps; 0 picks a stride giving <= 200 intervals.
    std::size_t record_stride = 0;
};

/// Euler-Maruyama paths sampled at the recorded times.
struct PathEnsemble {
    std::size_t n_paths = 0;
    std::size_t dim = 0;
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t record_stride = 1;
    std::vector<double> times;     // recorded times, 0 and T included
    std::vector<double> states;    // [path][time][coord]
    std::vector<double> weights;   // > 0; identically 1 in direct mode
    std::vector<double> log_weights;
    SimulationMode mode = SimulationMode::direct;
    std::uint64_t seed = 0;
    InitialLaw x0;

    std::span<const double> state(std::size_t path, std::size_t time_index) const {
        return {states.data() + (path * times.size() + time_index) * dim, dim};
    }
};

PathEnsemble simulate(const ProblemSpec& problem, const ControlPolicy& policy,
                      const QuadratureGrid& grid, const SimulationOptions& options);

struct CostEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
    double effective_sample_size = 0.0;
};

/// Weighted (self-normalized) estimate of int_0^T E g(X(t)) dt with the
/// trapezoid rule on the recorded times.
CostEstimate estimate_cost(const PathEnsemble& ensemble, const ScalarField& g);

/// Weighted mean of g(X(t)) at one recorded time index.
CostEstimate estimate_mean(const PathEnsemble& ensemble, const ScalarField& g, std::size_t time_index);

struct WeightReport {
    double mean = 1.0;
    double standard_error = 0.0;
    double effective_sample_size = 0.0;
    bool within_three_se = true;
};

WeightReport weight_report(const PathEnsemble& ensemble);

struct FeynmanKacEntry {
    std::vector<double> probe;
    double time = 0.0;
    double monte_carlo = 0.0;
    double standard_error = 0.0;
    double galerkin = 0.0;
    double z = 0.0;
};

struct FeynmanKacReport {
    std::vector<FeynmanKacEntry> entries;
    double max_abs_z = 0.0;
};

/// Compares E g(X^u(t, x)) from fixed-start paths against the Galerkin
/// phi^u(t, x) at t in {T/4, T/2, T}. T/dt must be a multiple of 4.
FeynmanKacReport feynman_kac_check(const ProblemSpec& problem, const GalerkinSystem& system,
                                   const ControlPolicy& policy, const ForwardSolution& forward,
                                   const std::vector<std::vector<double>>& probes, std::size_t n_paths,
                                   double dt, std::uint64_t seed);

/// Weak-error study on common Brownian paths: every step size is driven by
/// the same fine increments, so differences of cost estimates between
/// consecutive step sizes have small variance.
struct WeakOrderStudy {
    std::vector<double> dts;
    std::vector<double> estimates;
    std::vector<double> standard_errors;
    std::vector<double> differences;  // estimates[i] - estimates[i+1]
    std::vector<double> difference_errors;
    double slope = 0.0;               // log-log slope of |differences| vs dts
};

WeakOrderStudy weak_order_study(const ProblemSpec& problem, const ControlPolicy& policy,
                                const QuadratureGrid& grid, const ScalarField& g,
                                const std::vector<double>& dts, std::size_t n_paths, std::uint64_t seed,
                                const InitialLaw& x0);

/// One-sample Kolmogorov-Smirnov statistic against N(0, variance).
double ks_statistic_gaussian(std::vector<double> samples, double variance);
/// Asymptotic 1% critical value of the one-sample KS statistic.
double ks_critical_1pct(std::size_t n);

/// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> v);

}  // namespace kolmo
