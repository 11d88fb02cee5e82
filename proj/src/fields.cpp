#include "kolmo/fields.hpp"

#include "kolmo/error.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

namespace kolmo {

ScalarField constant_scalar(double c) {
    return {[c](std::span<const double>) { return c; }, "constant"};
}

VectorField constant_vector(std::vector<double> c) {
    return {[c = std::move(c)](std::span<const double>, std::span<double> out) {
                std::copy(c.begin(), c.end(), out.begin());
            },
            "constant"};
}

Polynomial::Polynomial(std::size_t dim, std::vector<Term> terms)
    : dim_(dim), terms_(std::move(terms)) {
    for (const auto& t : terms_) {
        require(t.powers.size() == dim_, "polynomial term has wrong number of exponents");
        for (int p : t.powers) require(p >= 0, "polynomial exponents must be nonnegative");
        require(std::isfinite(t.coeff), "polynomial coefficient is not finite");
    }
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& t : terms_) {
        int s = 0;
        for (int p : t.powers) s += p;
        d = std::max(d, s);
    }
    return d;
}

double Polynomial::operator()(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& t : terms_) {
        double v = t.coeff;
        for (std::size_t k = 0; k < dim_; ++k) {
            for (int p = 0; p < t.powers[k]; ++p) v *= x[k];
        }
        sum += v;
    }
    return sum;
}

Polynomial Polynomial::derivative(std::size_t k) const {
    std::vector<Term> out;
    for (const auto& t : terms_) {
        if (t.powers[k] == 0) continue;
        Term d = t;
        d.coeff *= t.powers[k];
        d.powers[k] -= 1;
        out.push_back(std::move(d));
    }
    return Polynomial(dim_, std::move(out));
}

void Polynomial::gradient(std::span<const double> x, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& t : terms_) {
        for (std::size_t k = 0; k < dim_; ++k) {
            if (t.powers[k] == 0) continue;
            double v = t.coeff * t.powers[k];
            for (std::size_t j = 0; j < dim_; ++j) {
                const int p = (j == k) ? t.powers[j] - 1 : t.powers[j];
                for (int e = 0; e < p; ++e) v *= x[j];
            }
            out[k] += v;
        }
    }
}

ScalarField Polynomial::as_field(std::string name) const {
    auto self = std::make_shared<const Polynomial>(*this);
    return {[self](std::span<const double> x) { return (*self)(x); }, std::move(name)};
}

VectorField polynomial_vector_field(std::vector<Polynomial> components, std::string name) {
    auto comps = std::make_shared<const std::vector<Polynomial>>(std::move(components));
    return {[comps](std::span<const double> x, std::span<double> out) {
                for (std::size_t k = 0; k < comps->size(); ++k) out[k] = (*comps)[k](x);
            },
            std::move(name)};
}

VectorField negative_gradient_field(const Polynomial& potential, std::string name) {
    auto self = std::make_shared<const Polynomial>(potential);
    return {[self](std::span<const double> x, std::span<double> out) {
                self->gradient(x, out);
                for (double& v : out) v = -v;
            },
            std::move(name)};
}

}  // namespace kolmo
