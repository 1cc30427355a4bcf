#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mogen {

// Interleaved RGB image with values in [0,1].
struct Image {
    size_t h = 0, w = 0;
    std::vector<double> px;  // h*w*3

    Image() = default;
    Image(size_t height, size_t width, double r = 0.0, double g = 0.0, double b = 0.0)
        : h(height), w(width), px(height * width * 3) {
        for (size_t i = 0; i < height * width; ++i) {
            px[i * 3 + 0] = r;
            px[i * 3 + 1] = g;
            px[i * 3 + 2] = b;
        }
    }

    double& at(size_t y, size_t x, size_t c) { return px[(y * w + x) * 3 + c]; }
    double at(size_t y, size_t x, size_t c) const { return px[(y * w + x) * 3 + c]; }
    size_t size() const { return px.size(); }

    bool operator==(const Image& o) const { return h == o.h && w == o.w && px == o.px; }
};

// Binary PPM (P6, maxval 255). Values are clamped to [0,1] and rounded.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

std::vector<uint8_t> ppm_bytes(const Image& img);

Image resize_nearest(const Image& img, size_t nh, size_t nw);

}  // namespace mogen
