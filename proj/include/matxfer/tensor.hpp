#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace matxfer {

// Dense row-major float32 tensor. Shapes in practice: [C,H,W] activations,
// [O,C,K,K] conv kernels, [M,N] fully-connected weights, [C] vectors, [1] scalars.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), 0.0f);
    }

    static Tensor scalar(float v) {
        Tensor t({1});
        t.data[0] = v;
        return t;
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int e : s) n *= static_cast<std::size_t>(e);
        return s.empty() ? 0 : n;
    }

    std::size_t numel() const { return data.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

    void fill(float v) { data.assign(data.size(), v); }
    void zero() { fill(0.0f); }
};

} // namespace matxfer
