#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "elc/errors.hpp"

namespace elc {

// (batch, channels, height, width), row-major with width contiguous.
struct Shape4 {
    int64_t n = 0;
    int64_t c = 0;
    int64_t h = 0;
    int64_t w = 0;

    int64_t size() const { return n * c * h * w; }
    bool operator==(const Shape4&) const = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

// Dense 4-D tensor of doubles. All training math runs in 64-bit.
struct Tensor4 {
    Shape4 shape;
    std::vector<double> data;

    Tensor4() = default;
    explicit Tensor4(Shape4 s) : shape(s), data(static_cast<size_t>(s.size()), 0.0) {
        if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
            throw ShapeError("Tensor4: negative dimension in shape " + s.str());
    }
    Tensor4(Shape4 s, std::vector<double> d) : shape(s), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != s.size())
            throw ShapeError("Tensor4: data length " + std::to_string(data.size()) +
                             " does not match shape " + s.str());
    }

    int64_t size() const { return shape.size(); }

    double& at(int64_t n, int64_t c, int64_t y, int64_t x) {
        return data[static_cast<size_t>(((n * shape.c + c) * shape.h + y) * shape.w + x)];
    }
    double at(int64_t n, int64_t c, int64_t y, int64_t x) const {
        return data[static_cast<size_t>(((n * shape.c + c) * shape.h + y) * shape.w + x)];
    }

    double* plane(int64_t n, int64_t c) {
        return data.data() + static_cast<size_t>((n * shape.c + c) * shape.h * shape.w);
    }
    const double* plane(int64_t n, int64_t c) const {
        return data.data() + static_cast<size_t>((n * shape.c + c) * shape.h * shape.w);
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

} // namespace elc
