#include "kolmo/measure.hpp"

#include "kolmo/error.hpp"
#include "kolmo/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace kolmo {

MeasureSpec MeasureSpec::gaussian(std::vector<double> variances) {
    MeasureSpec m;
    m.kind = Kind::gaussian;
    m.variances = std::move(variances);
    m.validate();
    return m;
}

MeasureSpec MeasureSpec::gibbs(std::vector<double> base_variances, ScalarField potential,
                               double potential_lower_bound) {
    MeasureSpec m;
    m.kind = Kind::gibbs;
    m.variances = std::move(base_variances);
    m.potential = std::move(potential);
    m.potential_lower_bound = potential_lower_bound;
    m.validate();
    return m;
}

void MeasureSpec::validate() const {
    require(!variances.empty(), "measure dimension must be at least 1");
    for (double v : variances) {
        require(std::isfinite(v) && v > 0.0,
                "measure variances must be strictly positive (degenerate directions are unsupported)");
    }
    if (kind == Kind::gibbs) require(static_cast<bool>(potential), "gibbs measure needs a potential");
}

namespace {

// Orthonormal Hermite values hhat_0..hhat_{n} at x, hhat_k = He_k / sqrt(k!).
void normalized_hermite(int n, double x, double& h_n, double& h_nm1) {
    double prev = 0.0;
    double cur = 1.0;
    for (int k = 0; k < n; ++k) {
        const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                            std::sqrt(static_cast<double>(k + 1));
        prev = cur;
        cur = next;
    }
    h_n = cur;
    h_nm1 = prev;
}

}  // namespace

GaussHermiteRule gauss_hermite(int level) {
    require(level >= 1, "Gauss-Hermite level must be positive");
    const int n = level;
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite recurrence.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) numerical_failure("Gauss-Hermite eigenproblem failed");

    GaussHermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = eig.eigenvalues()[i];
        // Newton polish: He_n' = n He_{n-1}, i.e. hhat_n' = sqrt(n) hhat_{n-1}.
        for (int it = 0; it < 6; ++it) {
            double hn = 0.0, hnm1 = 0.0;
            normalized_hermite(n, x, hn, hnm1);
            const double dx = hn / (std::sqrt(static_cast<double>(n)) * hnm1);
            x -= dx;
            if (std::abs(dx) <= 1e-16 * (1.0 + std::abs(x))) break;
        }
        double hn = 0.0, hnm1 = 0.0;
        normalized_hermite(n, x, hn, hnm1);
        rule.nodes[i] = x;
        rule.weights[i] = 1.0 / (n * hnm1 * hnm1);
    }
    // Exact symmetry about the origin.
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
    for (double& w : rule.weights) w /= total;
    return rule;
}

namespace {

void check_levels(const MeasureSpec& measure, std::span<const int> levels, const GridLimits& limits) {
    measure.validate();
    const std::size_t dim = measure.dim();
    require(dim <= limits.max_dim, "dimension " + std::to_string(dim) + " exceeds cap " +
                                       std::to_string(limits.max_dim));
    require(levels.size() == dim, "need one quadrature level per dimension");
    std::size_t total = 1;
    for (int l : levels) {
        require(l >= 2, "quadrature level must be at least 2");
        require(total <= limits.node_budget / static_cast<std::size_t>(l),
                "quadrature node budget exceeded (" + std::to_string(limits.node_budget) + ")");
        total *= static_cast<std::size_t>(l);
    }
}

// Gauss-Hermite grid for the proposal N(0, scale * variances). Gaussian
// measures always use scale 1; Gibbs weights carry the density ratio back to
// the base Gaussian together with exp(-2U).
QuadratureGrid scaled_grid(const MeasureSpec& measure, std::span<const int> levels, double scale) {
    const std::size_t dim = measure.dim();
    std::size_t total = 1;
    for (int l : levels) total *= static_cast<std::size_t>(l);

    QuadratureGrid grid;
    grid.measure = measure;
    grid.levels.assign(levels.begin(), levels.end());
    grid.proposal_scale = scale;
    std::vector<GaussHermiteRule> rules;
    for (std::size_t k = 0; k < dim; ++k) {
        rules.push_back(gauss_hermite(levels[k]));
        const double sigma = std::sqrt(scale * measure.variances[k]);
        std::vector<double> axis(rules.back().nodes);
        for (double& x : axis) x *= sigma;
        grid.axis_nodes.push_back(std::move(axis));
    }

    grid.nodes.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(total));
    grid.weights.resize(static_cast<Eigen::Index>(total));
    std::vector<int> idx(dim, 0);
    for (std::size_t p = 0; p < total; ++p) {
        double w = 1.0;
        for (std::size_t k = 0; k < dim; ++k) {
            grid.nodes(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) =
                grid.axis_nodes[k][idx[k]];
            w *= rules[k].weights[idx[k]];
        }
        grid.weights[static_cast<Eigen::Index>(p)] = w;
        for (std::size_t k = 0; k < dim; ++k) {
            if (++idx[k] < levels[k]) break;
            idx[k] = 0;
        }
    }

    if (measure.kind == MeasureSpec::Kind::gibbs) {
        Eigen::VectorXd factor(static_cast<Eigen::Index>(total));
        parallel_for(total, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                const double u = measure.potential(grid.node(p));
                if (!std::isfinite(u)) {
                    numerical_failure("potential is not finite at quadrature node " +
                                      std::to_string(p));
                }
                double log_ratio = 0.0;
                if (scale != 1.0) {
                    for (std::size_t k = 0; k < dim; ++k) {
                        const double x = grid.node(p)[k];
                        log_ratio += 0.5 * std::log(scale) +
                                     0.5 * x * x * (1.0 / scale - 1.0) / measure.variances[k];
                    }
                }
                factor[static_cast<Eigen::Index>(p)] = std::exp(log_ratio - 2.0 * u);
            }
        });
        grid.weights = grid.weights.cwiseProduct(factor);
        const double z = grid.weights.sum();
        if (!(z > 0.0) || !std::isfinite(z)) {
            numerical_failure("Gibbs reweighting produced zero total weight; potential too singular");
        }
        grid.weights /= z;
        grid.log_partition = std::log(z);
    } else {
        grid.weights /= grid.weights.sum();
    }
    return grid;
}

std::size_t node_count(std::span<const int> levels) {
    std::size_t total = 1;
    for (int l : levels) total *= static_cast<std::size_t>(l);
    return total;
}

double relative_gap(const QuadratureGrid& a, const QuadratureGrid& b) {
    return std::abs(std::exp(a.log_partition - b.log_partition) - 1.0);
}

}  // namespace

QuadratureGrid build_grid(const MeasureSpec& measure, std::span<const int> levels,
                          const GridLimits& limits) {
    check_levels(measure, levels, limits);
    if (measure.kind == MeasureSpec::Kind::gaussian) return scaled_grid(measure, levels, 1.0);

    // Reweighting the base Gaussian rule converges slowly for confining
    // potentials because exp(-2U) concentrates the mass. Narrower proposals
    // are tried and the one whose partition function is most stable under
    // level refinement wins.
    std::vector<int> finer(levels.begin(), levels.end());
    for (int& l : finer) l = l + (l + 1) / 2;
    if (node_count(finer) > limits.node_budget) return scaled_grid(measure, levels, 1.0);

    QuadratureGrid best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (double scale : {1.0, 0.7, 0.5, 0.35, 0.25}) {
        QuadratureGrid g;
        double gap = 0.0;
        try {
            g = scaled_grid(measure, levels, scale);
            gap = relative_gap(g, scaled_grid(measure, finer, scale));
        } catch (const Error&) {
            if (scale == 1.0) throw;
            continue;
        }
        if (!std::isfinite(gap)) continue;
        if (gap < best_gap) {
            best_gap = gap;
            best = std::move(g);
        }
    }
    if (best.size() == 0) return scaled_grid(measure, levels, 1.0);
    return best;
}

QuadratureGrid build_grid(const MeasureSpec& measure, int level, const GridLimits& limits) {
    std::vector<int> levels(measure.dim(), level);
    return build_grid(measure, levels, limits);
}

namespace {

constexpr std::uint64_t kGridMagic = 0x4b4f4c4d4f475232ull;  // "KOLMOGR2"

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string grid_cache_name(const MeasureSpec& measure, std::span<const int> levels) {
    std::ostringstream key;
    key << measure.cache_key << '|';
    for (double v : measure.variances) key << std::hexfloat << v << ',';
    key << '|';
    for (int l : levels) key << l << ',';
    std::ostringstream name;
    name << "grid_" << std::hex << fnv1a(key.str()) << ".bin";
    return name.str();
}

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool read_pod(std::ifstream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

bool load_grid(const std::filesystem::path& path, const MeasureSpec& measure,
               std::span<const int> levels, QuadratureGrid& grid) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::uint64_t magic = 0, dim = 0, count = 0;
    if (!read_pod(in, magic) || magic != kGridMagic) return false;
    if (!read_pod(in, dim) || dim != measure.dim()) return false;
    std::vector<int> stored(dim);
    for (auto& l : stored) {
        std::int32_t v = 0;
        if (!read_pod(in, v)) return false;
        l = v;
    }
    if (!std::equal(stored.begin(), stored.end(), levels.begin(), levels.end())) return false;
    if (!read_pod(in, count)) return false;
    grid.measure = measure;
    grid.levels = stored;
    grid.nodes.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
    grid.weights.resize(static_cast<Eigen::Index>(count));
    in.read(reinterpret_cast<char*>(grid.nodes.data()),
            static_cast<std::streamsize>(sizeof(double) * dim * count));
    in.read(reinterpret_cast<char*>(grid.weights.data()),
            static_cast<std::streamsize>(sizeof(double) * count));
    if (!read_pod(in, grid.log_partition)) return false;
    if (!read_pod(in, grid.proposal_scale)) return false;
    grid.axis_nodes.clear();
    for (std::size_t k = 0; k < dim; ++k) {
        std::uint64_t n = 0;
        if (!read_pod(in, n)) return false;
        std::vector<double> axis(n);
        in.read(reinterpret_cast<char*>(axis.data()), static_cast<std::streamsize>(sizeof(double) * n));
        grid.axis_nodes.push_back(std::move(axis));
    }
    return static_cast<bool>(in);
}

void save_grid(const std::filesystem::path& path, const QuadratureGrid& grid) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return;
    write_pod(out, kGridMagic);
    write_pod(out, static_cast<std::uint64_t>(grid.dim()));
    for (int l : grid.levels) write_pod(out, static_cast<std::int32_t>(l));
    write_pod(out, static_cast<std::uint64_t>(grid.size()));
    out.write(reinterpret_cast<const char*>(grid.nodes.data()),
              static_cast<std::streamsize>(sizeof(double) * grid.nodes.size()));
    out.write(reinterpret_cast<const char*>(grid.weights.data()),
              static_cast<std::streamsize>(sizeof(double) * grid.weights.size()));
    write_pod(out, grid.log_partition);
    write_pod(out, grid.proposal_scale);
    for (const auto& axis : grid.axis_nodes) {
        write_pod(out, static_cast<std::uint64_t>(axis.size()));
        out.write(reinterpret_cast<const char*>(axis.data()),
                  static_cast<std::streamsize>(sizeof(double) * axis.size()));
    }
}

}  // namespace

QuadratureGrid build_grid_cached(const MeasureSpec& measure, std::span<const int> levels,
                                 const GridLimits& limits) {
    const char* dir = std::getenv("KOLMO_CACHE_DIR");
    if (dir == nullptr || *dir == '\0' || measure.cache_key.empty()) {
        return build_grid(measure, levels, limits);
    }
    const std::filesystem::path path = std::filesystem::path(dir) / grid_cache_name(measure, levels);
    QuadratureGrid grid;
    if (load_grid(path, measure, levels, grid)) return grid;
    grid = build_grid(measure, levels, limits);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    save_grid(path, grid);
    return grid;
}

double partition_stabilization(const MeasureSpec& measure, int level) {
    if (measure.kind != MeasureSpec::Kind::gibbs) return 0.0;
    const double z1 = std::exp(build_grid(measure, level).log_partition);
    const double z2 = std::exp(build_grid(measure, 2 * level).log_partition);
    return std::abs(z1 - z2) / z2;
}

double inner_product(std::span<const double> f, std::span<const double> g,
                     const QuadratureGrid& grid) {
    require(f.size() == grid.size() && g.size() == grid.size(),
            "field length does not match quadrature node count");
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        sum += grid.weights[static_cast<Eigen::Index>(i)] * f[i] * g[i];
    }
    return sum;
}

Eigen::VectorXd sample(const ScalarField& f, const QuadratureGrid& grid) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t p = 0; p < grid.size(); ++p) out[static_cast<Eigen::Index>(p)] = f(grid.node(p));
    return out;
}

Eigen::MatrixXd sample(const VectorField& f, const QuadratureGrid& grid) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.dim()), static_cast<Eigen::Index>(grid.size()));
    for (std::size_t p = 0; p < grid.size(); ++p) {
        f(grid.node(p), {out.data() + p * grid.dim(), grid.dim()});
    }
    return out;
}

double l2_norm(std::span<const double> f, const QuadratureGrid& grid) {
    return std::sqrt(std::max(0.0, inner_product(f, f, grid)));
}

std::size_t nearest_node(const QuadratureGrid& grid, std::span<const double> x) {
    std::size_t index = 0;
    std::size_t stride = 1;
    for (std::size_t k = 0; k < grid.dim(); ++k) {
        const auto& axis = grid.axis_nodes[k];
        auto it = std::lower_bound(axis.begin(), axis.end(), x[k]);
        std::size_t j = 0;
        if (it == axis.end()) {
            j = axis.size() - 1;
        } else {
            j = static_cast<std::size_t>(it - axis.begin());
            if (j > 0 && (x[k] - axis[j - 1]) <= (*it - x[k])) --j;
        }
        index += j * stride;
        stride *= axis.size();
    }
    return index;
}

}  // namespace kolmo
