#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace apnea {

// Dense row-major tensor. `grad` is allocated (same length as `values`,
// zero-filled) iff requires_grad is set.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s, T fill = T{})
        : shape(std::move(s)), values(numel_of(shape), fill) {}

    Tensor(std::vector<std::size_t> s, std::vector<T> v) : shape(std::move(s)), values(std::move(v)) {
        assert(values.size() == numel_of(shape));
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t numel() const { return values.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }
    std::size_t rank() const { return shape.size(); }

    void set_requires_grad(bool on) {
        requires_grad = on;
        if (on)
            grad.assign(values.size(), T{});
        else
            grad.clear();
    }

    void zero_grad() { grad.assign(grad.size(), T{}); }

    // NCHW accessors
    T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return values[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return values[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    T& at2(std::size_t i, std::size_t j) { return values[i * shape[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return values[i * shape[1] + j]; }
};

}  // namespace apnea
