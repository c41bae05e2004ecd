#include "iled/tensor.hpp"

#include <cmath>
#include <sstream>

#include "iled/errors.hpp"

namespace iled::diff {

std::int64_t shape_product(const std::vector<std::int64_t>& s) {
    std::int64_t p = 1;
    for (auto d : s) p *= d;
    return p;
}

std::string shape_to_string(const std::vector<std::int64_t>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<std::int64_t> s)
    : shape(std::move(s)), data(static_cast<std::size_t>(shape_product(shape)), 0.0) {}

Tensor::Tensor(std::vector<std::int64_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_product(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("Tensor: data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_to_string(shape));
}

Tensor Tensor::zeros(std::vector<std::int64_t> s) { return Tensor(std::move(s)); }

Tensor Tensor::full(std::vector<std::int64_t> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::from(std::vector<double> d) {
    auto n = static_cast<std::int64_t>(d.size());
    return Tensor({n}, std::move(d));
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

void add_inplace(Tensor& y, const Tensor& x) {
    if (!y.same_shape(x)) throw ShapeError("add_inplace: shape mismatch " + y.shape_str() + " vs " + x.shape_str());
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
}

void axpy_inplace(Tensor& y, double c, const Tensor& x) {
    if (!y.same_shape(x)) throw ShapeError("axpy_inplace: shape mismatch");
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += c * x.data[i];
}

double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace iled::diff
