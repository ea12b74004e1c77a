#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace keydyn {

/// Dense row-major tensor, up to 3 axes (batch, sequence, channel).
template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel(shape), T{});
    }

    static std::size_t numel(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("negative tensor dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    int dim(std::size_t axis) const { return shape.at(axis); }

    T& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
    const T& operator()(int i) const { return data[static_cast<std::size_t>(i)]; }

    T& operator()(int i, int j) {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    const T& operator()(int i, int j) const {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }

    T& operator()(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    const T& operator()(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }

    void zero() { std::fill(data.begin(), data.end(), T{}); }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void check_finite(const char* where) const {
        if (!all_finite())
            throw std::runtime_error(std::string("non-finite values at ") + where);
    }
};

template <class T>
struct ParamRef {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;
};

}  // namespace keydyn
