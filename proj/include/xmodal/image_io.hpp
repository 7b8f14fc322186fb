#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

// 8-bit RGB raster, row-major, interleaved.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;  // 3 * width * height

    uint8_t at(int y, int x, int c) const { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    uint8_t& at(int y, int x, int c) { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

Image load_png(const std::string& path);
void save_png(const std::string& path, const Image& img);

// Bilinear resize (half-pixel sampling).
Image resize_image(const Image& img, int new_w, int new_h);

// Resize to 64x64 RGB and map to [-1,1] via v/127.5 - 1. Output [3,64,64].
Tensor<float> image_preprocess(const Image& img, int size = 64);

// Inverse of the preprocessing map, clamped to [0,255].
Image tensor_to_image(const Tensor<float>& t);

}  // namespace xmodal
