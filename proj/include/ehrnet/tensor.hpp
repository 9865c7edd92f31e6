#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ehrnet/error.hpp"

namespace ehrnet {

/// Dense rank-4 float tensor in (batch, channels, height, width) order,
/// row-major storage. The carrier for every feature map, heatmap and tagmap.
struct Tensor {
    std::array<int, 4> dims{1, 1, 1, 1};
    std::vector<float> data;

    Tensor() : data(1, 0.0f) {}

    Tensor(int n, int c, int h, int w, float fill = 0.0f) : dims{n, c, h, w} {
        validate_dims();
        data.assign(count(), fill);
    }

    Tensor(const std::array<int, 4>& d, std::vector<float> values) : dims(d), data(std::move(values)) {
        validate_dims();
        if (data.size() != static_cast<size_t>(count()))
            throw ConfigError("tensor data length " + std::to_string(data.size()) +
                              " does not match dims " + shape_str());
    }

    int batch() const { return dims[0]; }
    int channels() const { return dims[1]; }
    int height() const { return dims[2]; }
    int width() const { return dims[3]; }

    std::int64_t count() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2] * dims[3];
    }

    float& at(int n, int c, int h, int w) { return data[index(n, c, h, w)]; }
    float at(int n, int c, int h, int w) const { return data[index(n, c, h, w)]; }

    std::int64_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::int64_t>(n) * dims[1] + c) * dims[2] + h) * dims[3] + w;
    }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }

    std::string shape_str() const {
        return std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "x" +
               std::to_string(dims[2]) + "x" + std::to_string(dims[3]);
    }

private:
    void validate_dims() const {
        for (int d : dims)
            if (d < 1)
                throw ConfigError("tensor dims must all be >= 1, got " + shape_str());
    }
};

} // namespace ehrnet
