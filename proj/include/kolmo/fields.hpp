#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace kolmo {

/// Real-valued function on R^n.
struct ScalarField {
    std::function<double(std::span<const double>)> fn;
    std::string name;

    double operator()(std::span<const double> x) const { return fn(x); }
    explicit operator bool() const { return static_cast<bool>(fn); }
};

/// R^n -> R^n map. Writes into `out`, which has the same length as `x`.
struct VectorField {
    std::function<void(std::span<const double>, std::span<double>)> fn;
    std::string name;

    void operator()(std::span<const double> x, std::span<double> out) const { fn(x, out); }
    explicit operator bool() const { return static_cast<bool>(fn); }
};

ScalarField constant_scalar(double c);
VectorField constant_vector(std::vector<double> c);

/// Sparse multivariate polynomial: sum of coeff * prod_k x_k^powers[k].
class Polynomial {
public:
    struct Term {
        double coeff = 0.0;
        std::vector<int> powers;
    };

    Polynomial() = default;
    Polynomial(std::size_t dim, std::vector<Term> terms);

    std::size_t dim() const { return dim_; }
    const std::vector<Term>& terms() const { return terms_; }
    int degree() const;

    double operator()(std::span<const double> x) const;
    /// d/dx_k as a new polynomial.
    Polynomial derivative(std::size_t k) const;
    void gradient(std::span<const double> x, std::span<double> out) const;

    ScalarField as_field(std::string name) const;

private:
    std::size_t dim_ = 0;
    std::vector<Term> terms_;
};

/// One polynomial per output component.
VectorField polynomial_vector_field(std::vector<Polynomial> components, std::string name);

/// -grad U for a polynomial potential.
VectorField negative_gradient_field(const Polynomial& potential, std::string name);

}  // namespace kolmo
