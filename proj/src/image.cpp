#include "mogen/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mogen/tensor.hpp"

namespace mogen {

namespace {

uint8_t quantize(double v) {
    if (v <= 0.0) return 0;
    if (v >= 1.0) return 255;
    return static_cast<uint8_t>(std::lround(v * 255.0));
}

}  // namespace

std::vector<uint8_t> ppm_bytes(const Image& img) {
    char header[64];
    const int n = std::snprintf(header, sizeof header, "P6\n%zu %zu\n255\n", img.w, img.h);
    std::vector<uint8_t> out(header, header + n);
    out.reserve(out.size() + img.px.size());
    for (double v : img.px) out.push_back(quantize(v));
    return out;
}

void write_ppm(const std::string& path, const Image& img) {
    const auto bytes = ppm_bytes(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw MogenError("write_ppm: cannot open " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw MogenError("write_ppm: write failed for " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MogenError("read_ppm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw MogenError("read_ppm: " + path + " is not a binary PPM");
    auto next_int = [&]() {
        // skip whitespace and '#' comments
        int c = f.get();
        while (c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '#') {
            if (c == '#')
                while (c != '\n' && c != EOF) c = f.get();
            c = f.get();
        }
        long v = 0;
        bool any = false;
        while (c >= '0' && c <= '9') {
            v = v * 10 + (c - '0');
            any = true;
            c = f.get();
        }
        if (!any) throw MogenError("read_ppm: malformed header in " + path);
        return v;
    };
    const long w = next_int();
    const long h = next_int();
    const long maxval = next_int();
    if (w <= 0 || h <= 0 || maxval != 255)
        throw MogenError("read_ppm: unsupported PPM header in " + path);
    Image img(static_cast<size_t>(h), static_cast<size_t>(w));
    std::vector<uint8_t> buf(img.px.size());
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (f.gcount() != static_cast<std::streamsize>(buf.size()))
        throw MogenError("read_ppm: truncated pixel data in " + path);
    for (size_t i = 0; i < buf.size(); ++i) img.px[i] = buf[i] / 255.0;
    return img;
}

Image resize_nearest(const Image& img, size_t nh, size_t nw) {
    Image out(nh, nw);
    for (size_t y = 0; y < nh; ++y) {
        const size_t sy = std::min(img.h - 1, static_cast<size_t>(y * img.h / nh));
        for (size_t x = 0; x < nw; ++x) {
            const size_t sx = std::min(img.w - 1, static_cast<size_t>(x * img.w / nw));
            for (size_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

}  // namespace mogen
