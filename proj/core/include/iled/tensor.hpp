#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iled::diff {

// Dense row-major tensor of 64-bit floats. This is the universal value type
// of the differentiation engine; shapes are small (rank <= 3 in practice:
// scalars (), vectors (n), matrices (B,n), conv activations (B,C,L)).
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> s);
    Tensor(std::vector<std::int64_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::int64_t> s);
    static Tensor full(std::vector<std::int64_t> s, double v);
    static Tensor scalar(double v);
    static Tensor from(std::vector<double> d);  // 1-D

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t rank() const { return static_cast<std::int64_t>(shape.size()); }
    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // 2-D / 3-D accessors (no bounds checks in release paths).
    double& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
    double at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
    double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
        return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
    }
    double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    double max_abs() const;

    std::string shape_str() const;
};

std::int64_t shape_product(const std::vector<std::int64_t>& s);
std::string shape_to_string(const std::vector<std::int64_t>& s);

// In-place y += x (shapes must match).
void add_inplace(Tensor& y, const Tensor& x);
// In-place y += c*x.
void axpy_inplace(Tensor& y, double c, const Tensor& x);

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);

}  // namespace iled::diff
