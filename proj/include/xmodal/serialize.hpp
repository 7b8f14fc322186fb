#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

// Named-tensor container serialized as little-endian binary: magic "XMT1",
// u32 block count, then per block u32 name length + UTF-8 name + u32 rank +
// u32 dims + raw 32-bit floats.
struct TensorFile {
    std::vector<std::pair<std::string, Tensor<float>>> entries;

    void add(const std::string& name, const Tensor<float>& t) { entries.emplace_back(name, t); }

    const Tensor<float>* find(const std::string& name) const {
        for (const auto& [n, t] : entries)
            if (n == name) return &t;
        return nullptr;
    }
};

void save_tensors(const std::string& path, const TensorFile& tf);
TensorFile load_tensors(const std::string& path);

}  // namespace xmodal
