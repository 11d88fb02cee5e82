#include "kolmo/sde.hpp"

#include "kolmo/error.hpp"
#include "kolmo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace kolmo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SimulationMode parse_mode(const std::string& name) {
    if (name == "direct") return SimulationMode::direct;
    if (name == "girsanov") return SimulationMode::girsanov;
    throw Error(ErrorKind::validation, "unknown simulation mode '" + name + "'");
}

std::string to_string(SimulationMode m) { return m == SimulationMode::direct ? "direct" : "girsanov"; }

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

// ---------------------------------------------------------------------------
// Control policy

ControlPolicy::ControlPolicy(std::size_t dim) : dim_(dim), zero_(true) {}

ControlPolicy::ControlPolicy(const ProblemSpec& problem, const QuadratureGrid& grid, const ControlField& u,
                             Interpolation interpolation, const GalerkinSystem* system)
    : dim_(problem.dim), zero_(false), interp_(interpolation), grid_(grid), b_(problem.control),
      rho_(u.rho) {
    require(u.values.rows() == static_cast<Index>(dim_) && u.values.cols() == static_cast<Index>(grid.size()),
            "control field does not match the grid");
    require_admissible(u);
    zero_ = u.values.cwiseAbs().maxCoeff() == 0.0;
    if (b_.kind == BOperator::Kind::finite_rank) {
        // B u = sum_j c_j g_j(x) is defined everywhere once c_j is known.
        for (const auto& t : b_.terms) {
            const MatrixXd f = sample(t.f, grid);
            rank_coeffs_.push_back(f.cwiseProduct(u.values).colwise().sum().dot(grid.weights.transpose()));
        }
        return;
    }
    if (interp_ == Interpolation::nearest_node) {
        nodal_ = apply_B(b_, u, grid);
        return;
    }
    require(system != nullptr, "polynomial-fit interpolation needs an assembled Galerkin system");
    basis_ = system->basis;
    variances_ = grid.measure.variances;
    fit_coeffs_.resize(static_cast<Index>(dim_), static_cast<Index>(basis_.size()));
    for (Index k = 0; k < static_cast<Index>(dim_); ++k) {
        fit_coeffs_.row(k) = system->project(u.values.row(k).transpose()).transpose();
    }
}

void ControlPolicy::operator()(std::span<const double> x, std::span<double> bu) const {
    if (zero_) {
        std::fill(bu.begin(), bu.end(), 0.0);
        return;
    }
    if (b_.kind == BOperator::Kind::finite_rank) {
        std::fill(bu.begin(), bu.end(), 0.0);
        std::vector<double> gx(dim_);
        for (std::size_t j = 0; j < b_.terms.size(); ++j) {
            b_.terms[j].g(x, gx);
            for (std::size_t k = 0; k < dim_; ++k) bu[k] += rank_coeffs_[j] * gx[k];
        }
        return;
    }
    if (interp_ == Interpolation::nearest_node) {
        const std::size_t p = nearest_node(grid_, x);
        for (std::size_t k = 0; k < dim_; ++k) bu[k] = nodal_(static_cast<Index>(k), static_cast<Index>(p));
        return;
    }
    VectorXd u(static_cast<Index>(dim_));
    for (Index k = 0; k < u.size(); ++k) {
        u[k] = expand_at(basis_, variances_, fit_coeffs_.row(k).transpose(), x);
    }
    const double norm = u.norm();
    if (norm > rho_) u *= rho_ / norm;
    if (b_.kind == BOperator::Kind::matrix) u = b_.matrix * u;
    for (std::size_t k = 0; k < dim_; ++k) bu[k] = u[static_cast<Index>(k)];
}

// ---------------------------------------------------------------------------
// Path simulation

namespace {

std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
                      0x6b6f6c6du};
    return std::mt19937_64(seq);
}

std::size_t steps_for(double horizon, double dt) {
    require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
    const double ratio = horizon / dt;
    const double rounded = std::round(ratio);
    require(rounded >= 1.0 && std::abs(ratio - rounded) <= 1e-9 * ratio, "dt must divide the horizon");
    return static_cast<std::size_t>(rounded);
}

std::size_t auto_stride(std::size_t steps) {
    std::size_t s = std::max<std::size_t>(1, (steps + 199) / 200);
    while (steps % s != 0) ++s;
    return s;
}

// Draws x0 for one path.
class InitialSampler {
public:
    InitialSampler(const ProblemSpec& problem, const QuadratureGrid& grid, const InitialLaw& law)
        : problem_(problem), law_(law) {
        if (law.kind == InitialLaw::Kind::fixed) {
            require(law.point.size() == problem.dim, "initial point has the wrong dimension");
            return;
        }
        const MeasureSpec& m = problem.measure;
        sigma_.resize(m.dim());
        for (std::size_t k = 0; k < m.dim(); ++k) sigma_[k] = std::sqrt(m.variances[k]);
        if (m.kind == MeasureSpec::Kind::gibbs) {
            require(grid.measure.kind == MeasureSpec::Kind::gibbs, "grid was not built for the Gibbs measure");
            // Acceptance rate of exp(-2(U - lb)) under the base Gaussian is Z exp(2 lb).
            const double rate = std::exp(grid.log_partition + 2.0 * m.potential_lower_bound);
            require(rate >= 1e-4, "Gibbs rejection sampler acceptance rate " + std::to_string(rate) +
                                      " is below 1e-4");
        }
    }

    void draw(std::mt19937_64& rng, std::normal_distribution<double>& normal, std::span<double> x) const {
        if (law_.kind == InitialLaw::Kind::fixed) {
            std::copy(law_.point.begin(), law_.point.end(), x.begin());
            return;
        }
        const MeasureSpec& m = problem_.measure;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (;;) {
            for (std::size_t k = 0; k < x.size(); ++k) x[k] = sigma_[k] * normal(rng);
            if (m.kind == MeasureSpec::Kind::gaussian) return;
            const double accept = std::exp(-2.0 * (m.potential(x) - m.potential_lower_bound));
            if (unif(rng) < accept) return;
        }
    }

private:
    const ProblemSpec& problem_;
    InitialLaw law_;
    std::vector<double> sigma_;
};

void guard(std::span<const double> x, std::size_t path) {
    for (double v : x) {
        if (!std::isfinite(v) || std::abs(v) > 1e8) {
            numerical_failure("path " + std::to_string(path) + " blew up (|x| > 1e8)");
        }
    }
}

}  // namespace

PathEnsemble simulate(const ProblemSpec& problem, const ControlPolicy& policy, const QuadratureGrid& grid,
                      const SimulationOptions& options) {
    problem.validate();
    require(options.n_paths >= 1, "need at least one path");
    const std::size_t steps = steps_for(problem.horizon, options.dt);
    const std::size_t stride = options.record_stride == 0 ? auto_stride(steps) : options.record_stride;
    require(steps % stride == 0, "record stride must divide the number of steps");

    const std::size_t n = problem.dim;
    PathEnsemble ens;
    ens.n_paths = options.n_paths;
    ens.dim = n;
    ens.dt = options.dt;
    ens.steps = steps;
    ens.record_stride = stride;
    ens.mode = options.mode;
    ens.seed = options.seed;
    ens.x0 = options.x0;
    const std::size_t n_rec = steps / stride + 1;
    for (std::size_t r = 0; r < n_rec; ++r) ens.times.push_back(static_cast<double>(r * stride) * options.dt);
    ens.states.assign(options.n_paths * n_rec * n, 0.0);
    ens.log_weights.assign(options.n_paths, 0.0);
    ens.weights.assign(options.n_paths, 1.0);

    const InitialSampler sampler(problem, grid, options.x0);
    const double sqdt = std::sqrt(options.dt);
    std::vector<double> sqrt_q(n);
    for (std::size_t k = 0; k < n; ++k) sqrt_q[k] = std::sqrt(problem.noise[k]);
    const bool girsanov = options.mode == SimulationMode::girsanov;
    const bool controlled = !policy.is_zero();

    parallel_for(options.n_paths, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> x(n), b(n), bu(n), xi(n);
        for (std::size_t path = lo; path < hi; ++path) {
            auto rng = path_stream(options.seed, path);
            std::normal_distribution<double> normal;
            sampler.draw(rng, normal, x);
            double* out = ens.states.data() + path * n_rec * n;
            std::copy(x.begin(), x.end(), out);
            double log_w = 0.0;
            for (std::size_t step = 0; step < steps; ++step) {
                problem.drift(x, b);
                if (controlled) policy(x, bu);
                for (std::size_t k = 0; k < n; ++k) xi[k] = normal(rng);
                for (std::size_t k = 0; k < n; ++k) {
                    double drift = b[k];
                    if (controlled && !girsanov) drift += sqrt_q[k] * bu[k];
                    x[k] += drift * options.dt + sqrt_q[k] * sqdt * xi[k];
                }
                if (controlled && girsanov) {
                    for (std::size_t k = 0; k < n; ++k) {
                        log_w += bu[k] * xi[k] * sqdt - 0.5 * bu[k] * bu[k] * options.dt;
                    }
                }
                guard(x, path);
                if ((step + 1) % stride == 0) {
                    std::copy(x.begin(), x.end(), out + ((step + 1) / stride) * n);
                }
            }
            ens.log_weights[path] = log_w;
            ens.weights[path] = std::exp(log_w);
        }
    });
    return ens;
}

// ---------------------------------------------------------------------------
// Estimators

namespace {

CostEstimate weighted_estimate(std::span<const double> values, std::span<const double> weights) {
    const std::size_t n = values.size();
    std::vector<double> wv(n), w2(n);
    for (std::size_t i = 0; i < n; ++i) {
        wv[i] = weights[i] * values[i];
        w2[i] = weights[i] * weights[i];
    }
    const double sw = pairwise_sum(weights);
    const double est = pairwise_sum(wv) / sw;
    for (std::size_t i = 0; i < n; ++i) {
        const double dev = values[i] - est;
        wv[i] = weights[i] * weights[i] * dev * dev;
    }
    CostEstimate out;
    out.estimate = est;
    const double sw2 = pairwise_sum(w2);
    out.effective_sample_size = sw * sw / sw2;
    const double bessel = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 0.0;
    out.standard_error = std::sqrt(bessel * pairwise_sum(wv)) / sw;
    return out;
}

}  // namespace

CostEstimate estimate_cost(const PathEnsemble& ensemble, const ScalarField& g) {
    const std::size_t n_rec = ensemble.times.size();
    std::vector<double> totals(ensemble.n_paths);
    parallel_for(ensemble.n_paths, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t path = lo; path < hi; ++path) {
            double sum = 0.0;
            double prev = g(ensemble.state(path, 0));
            for (std::size_t r = 1; r < n_rec; ++r) {
                const double cur = g(ensemble.state(path, r));
                sum += 0.5 * (ensemble.times[r] - ensemble.times[r - 1]) * (prev + cur);
                prev = cur;
            }
            totals[path] = sum;
        }
    });
    return weighted_estimate(totals, ensemble.weights);
}

CostEstimate estimate_mean(const PathEnsemble& ensemble, const ScalarField& g, std::size_t time_index) {
    require(time_index < ensemble.times.size(), "time index out of range");
    std::vector<double> values(ensemble.n_paths);
    for (std::size_t path = 0; path < ensemble.n_paths; ++path) {
        values[path] = g(ensemble.state(path, time_index));
    }
    return weighted_estimate(values, ensemble.weights);
}

WeightReport weight_report(const PathEnsemble& ensemble) {
    WeightReport rep;
    const std::size_t n = ensemble.n_paths;
    rep.mean = pairwise_sum(ensemble.weights) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (ensemble.weights[i] - rep.mean) * (ensemble.weights[i] - rep.mean);
    const double var = n > 1 ? pairwise_sum(sq) / static_cast<double>(n - 1) : 0.0;
    rep.standard_error = std::sqrt(var / static_cast<double>(n));
    double sw2 = 0.0;
    for (double w : ensemble.weights) sw2 += w * w;
    const double sw = rep.mean * static_cast<double>(n);
    rep.effective_sample_size = sw * sw / sw2;
    rep.within_three_se = std::abs(rep.mean - 1.0) <= 3.0 * rep.standard_error;
    return rep;
}

FeynmanKacReport feynman_kac_check(const ProblemSpec& problem, const GalerkinSystem& system,
                                   const ControlPolicy& policy, const ForwardSolution& forward,
                                   const std::vector<std::vector<double>>& probes, std::size_t n_paths,
                                   double dt, std::uint64_t seed) {
    const std::size_t steps = steps_for(problem.horizon, dt);
    require(steps % 4 == 0, "T/dt must be a multiple of 4 for the Feynman-Kac check");
    FeynmanKacReport rep;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        SimulationOptions opt;
        opt.n_paths = n_paths;
        opt.dt = dt;
        opt.seed = seed + i;
        opt.mode = SimulationMode::direct;
        opt.x0 = InitialLaw::fixed(probes[i]);
        opt.record_stride = steps / 4;
        const PathEnsemble ens = simulate(problem, policy, system.grid, opt);
        for (std::size_t r : {1u, 2u, 4u}) {
            FeynmanKacEntry e;
            e.probe = probes[i];
            e.time = ens.times[r];
            const CostEstimate mc = estimate_mean(ens, problem.objective, r);
            e.monte_carlo = mc.estimate;
            e.standard_error = mc.standard_error;
            e.galerkin = evaluate_at(system, forward.coeffs, forward.times, e.time, probes[i]);
            const double diff = e.monte_carlo - e.galerkin;
            if (e.standard_error > 0.0) {
                e.z = diff / e.standard_error;
            } else {
                e.z = std::abs(diff) <= 1e-12 * (1.0 + std::abs(e.galerkin)) ? 0.0
                                                                            : std::numeric_limits<double>::infinity();
            }
            rep.max_abs_z = std::max(rep.max_abs_z, std::abs(e.z));
            rep.entries.push_back(std::move(e));
        }
    }
    return rep;
}

WeakOrderStudy weak_order_study(const ProblemSpec& problem, const ControlPolicy& policy,
                                const QuadratureGrid& grid, const ScalarField& g,
                                const std::vector<double>& dts, std::size_t n_paths, std::uint64_t seed,
                                const InitialLaw& x0) {
    require(dts.size() >= 2, "weak-order study needs at least two step sizes");
    require(n_paths >= 2, "weak-order study needs at least two paths");
    const double fine_dt = *std::min_element(dts.begin(), dts.end());
    const std::size_t fine_steps = steps_for(problem.horizon, fine_dt);
    std::vector<std::size_t> ratio(dts.size());
    for (std::size_t l = 0; l < dts.size(); ++l) {
        const double r = dts[l] / fine_dt;
        require(std::abs(r - std::round(r)) <= 1e-9 * r, "step sizes must be multiples of the finest");
        ratio[l] = static_cast<std::size_t>(std::round(r));
        require(fine_steps % ratio[l] == 0, "step sizes must divide the horizon");
    }

    const std::size_t n = problem.dim;
    const std::size_t L = dts.size();
    const InitialSampler sampler(problem, grid, x0);
    std::vector<double> sqrt_q(n);
    for (std::size_t k = 0; k < n; ++k) sqrt_q[k] = std::sqrt(problem.noise[k]);
    std::vector<double> costs(n_paths * L);
    const bool controlled = !policy.is_zero();

    parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> x0v(n), xi(n), b(n), bu(n);
        std::vector<std::vector<double>> x(L, std::vector<double>(n));
        std::vector<std::vector<double>> acc(L, std::vector<double>(n));
        std::vector<double> total(L), prev_g(L);
        for (std::size_t path = lo; path < hi; ++path) {
            auto rng = path_stream(seed, path);
            std::normal_distribution<double> normal;
            sampler.draw(rng, normal, x0v);
            for (std::size_t l = 0; l < L; ++l) {
                x[l] = x0v;
                std::fill(acc[l].begin(), acc[l].end(), 0.0);
                total[l] = 0.0;
                prev_g[l] = g(x0v);
            }
            for (std::size_t step = 0; step < fine_steps; ++step) {
                for (std::size_t k = 0; k < n; ++k) xi[k] = normal(rng);
                for (std::size_t l = 0; l < L; ++l) {
                    for (std::size_t k = 0; k < n; ++k) acc[l][k] += xi[k];
                    if ((step + 1) % ratio[l] != 0) continue;
                    const double dt = dts[l];
                    const double sqdt_fine = std::sqrt(fine_dt);
                    problem.drift(x[l], b);
                    if (controlled) policy(x[l], bu);
                    for (std::size_t k = 0; k < n; ++k) {
                        double drift = b[k];
                        if (controlled) drift += sqrt_q[k] * bu[k];
                        x[l][k] += drift * dt + sqrt_q[k] * sqdt_fine * acc[l][k];
                        acc[l][k] = 0.0;
                    }
                    guard(x[l], path);
                    const double cur = g(x[l]);
                    total[l] += 0.5 * dt * (prev_g[l] + cur);
                    prev_g[l] = cur;
                }
            }
            for (std::size_t l = 0; l < L; ++l) costs[path * L + l] = total[l];
        }
    });

    WeakOrderStudy out;
    out.dts = dts;
    auto mean_se = [&](auto value) {
        std::vector<double> v(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p) v[p] = value(p);
        const double m = pairwise_sum(v) / static_cast<double>(n_paths);
        for (double& e : v) e = (e - m) * (e - m);
        const double var = pairwise_sum(v) / static_cast<double>(n_paths - 1);
        return std::pair{m, std::sqrt(var / static_cast<double>(n_paths))};
    };
    for (std::size_t l = 0; l < L; ++l) {
        const auto [m, se] = mean_se([&](std::size_t p) { return costs[p * L + l]; });
        out.estimates.push_back(m);
        out.standard_errors.push_back(se);
    }
    std::vector<double> lx, ly;
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const auto [m, se] = mean_se([&](std::size_t p) { return costs[p * L + l] - costs[p * L + l + 1]; });
        out.differences.push_back(m);
        out.difference_errors.push_back(se);
        lx.push_back(std::log(dts[l]));
        ly.push_back(std::log(std::abs(m)));
    }
    if (lx.size() == 1) {
        out.slope = std::numeric_limits<double>::quiet_NaN();
    } else {
        const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
        const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        out.slope = sxy / sxx;
    }
    return out;
}

double ks_statistic_gaussian(std::vector<double> samples, double variance) {
    require(!samples.empty(), "KS statistic needs samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    const double scale = std::sqrt(2.0 * variance);
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-samples[i] / scale);
        d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
    }
    return d;
}

double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace kolmo
