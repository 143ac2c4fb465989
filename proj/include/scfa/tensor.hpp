#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace scfa {

// Dense row-major tensor of doubles with a dynamic shape. All model math in
// this library runs in double precision; 8-bit image data is converted on
// entry.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
        : shape(std::move(dims)),
          data(count(shape), fill) {}

    static std::size_t count(const std::vector<std::size_t>& dims) {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return n;
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t dim(std::size_t i) const {
        if (i >= shape.size()) throw std::out_of_range("Tensor::dim: axis " + std::to_string(i));
        return shape[i];
    }

    // rank-2 access
    std::size_t rows() const { return rank() >= 1 ? shape[0] : 0; }
    std::size_t cols() const { return rank() >= 2 ? shape[1] : 1; }

    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline std::string shape_string(const std::vector<std::size_t>& dims) {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    s += ")";
    return s;
}

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& dims,
                          const std::string& what) {
    if (t.shape != dims) {
        throw std::invalid_argument(what + ": expected shape " + shape_string(dims) +
                                    ", found " + shape_string(t.shape));
    }
}

}  // namespace scfa
