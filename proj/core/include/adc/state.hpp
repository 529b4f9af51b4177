#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace adc {

/// One learnable parameter: shape plus flat row-major values.
struct ParamBlob {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;

    std::int64_t size() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
};

/// All learnable parameters of a network, keyed by a stable module path
/// (e.g. "encoder.stage3.block1.conv2.weight"). Order follows module
/// registration order and is part of the serialized format.
struct NetworkState {
    std::vector<ParamBlob> params;

    const ParamBlob* find(std::string_view name) const {
        for (const auto& p : params)
            if (p.name == name) return &p;
        return nullptr;
    }
    ParamBlob* find(std::string_view name) {
        for (auto& p : params)
            if (p.name == name) return &p;
        return nullptr;
    }
};

}  // namespace adc
