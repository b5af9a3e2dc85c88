#pragma once

#include <string>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

/// RGB raster, interleaved floats in [0,1]. Pixel centers sit at (i+0.5, j+0.5)
/// in continuous image coordinates.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> px;  // width*height*3

    Image() = default;
    Image(int w, int h) : width(w), height(h), px(static_cast<size_t>(w) * h * 3, 0.0f) {}

    float* at(int x, int y) { return px.data() + (static_cast<size_t>(y) * width + x) * 3; }
    const float* at(int x, int y) const {
        return px.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
};

/// Bilinear sample at continuous coordinates, zero outside the raster.
void sample_bilinear(const Image& img, double x, double y, float out[3]);

/// Inverse-mapped rotated crop through roi_to_transform(roi, crop_size).
Image crop_image(const Image& img, const Roi& roi, int crop_size);

/// Crop as a [3, S, S] tensor, the network input layout.
Tensor<float> image_to_tensor(const Image& img);

// Binary PPM (P6, 8-bit). Values are quantized at this boundary only.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

}  // namespace posekit
