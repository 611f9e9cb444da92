#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "snp/errors.hpp"

namespace snp {

// Dense rank-4 array, [batch, channels, height, width], row-major.
struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    size_t total() const {
        return static_cast<size_t>(n) * static_cast<size_t>(c) *
               static_cast<size_t>(h) * static_cast<size_t>(w);
    }
    bool operator==(const Shape4&) const = default;

    std::string str() const {
        return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + "]";
    }
};

struct Tensor4f {
    Shape4 shape;
    std::vector<float> data;

    Tensor4f() = default;
    explicit Tensor4f(Shape4 s) : shape(s), data(s.total(), 0.0f) {}

    static Tensor4f zeros(Shape4 s) { return Tensor4f(s); }
    static Tensor4f full(Shape4 s, float v) {
        Tensor4f t(s);
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    bool empty() const { return data.empty(); }
    size_t size() const { return data.size(); }
    bool same_shape(const Tensor4f& o) const { return shape == o.shape; }

    float& at(int n, int c, int y, int x) {
        return data[((static_cast<size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }
    float at(int n, int c, int y, int x) const {
        return data[((static_cast<size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }

    bool all_finite() const {
        for (float v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Elementwise helpers used by the guidance algebra and the toy backend.
inline void add_inplace(Tensor4f& a, const Tensor4f& b) {
    if (!a.same_shape(b))
        throw ContractViolation("elementwise add: shape " + a.shape.str() + " vs " + b.shape.str());
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

// Single-channel float image, row-major.
struct Gray {
    int h = 0, w = 0;
    std::vector<float> v;

    Gray() = default;
    Gray(int height, int width, float fill = 0.0f)
        : h(height), w(width), v(static_cast<size_t>(height) * width, fill) {}

    float& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    float at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    bool empty() const { return v.empty(); }

    bool all_finite() const {
        for (float x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// {0,1}-valued map; uint8 storage.
struct BinaryMap {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    BinaryMap() = default;
    BinaryMap(int height, int width, uint8_t fill = 0)
        : h(height), w(width), v(static_cast<size_t>(height) * width, fill) {}

    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }

    bool operator==(const BinaryMap&) const = default;
};

// Spatial size of one feature-injection site.
struct Resolution {
    int h = 0, w = 0;
    bool operator==(const Resolution&) const = default;
    std::string str() const { return std::to_string(h) + "x" + std::to_string(w); }
};

}  // namespace snp
